//! `nesstur` command-line driver.
//!
//! Exit codes: 0 on success, 1 when nothing was written because of an
//! error, 2 when outputs were written but an invariant was breached.

mod commands;
mod config;
mod figures;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::{Format, Quench, RunConfig, Settings, Sweep};
use crate::figures::{Command, Figure};
use crate::output::Artifact;

#[derive(Debug, Parser)]
#[command(name = "nesstur", version, about = "Steady-state work statistics and TUR checks for coupled qubits")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Steady-state populations, correlations and entanglement per sweep point.
    Ness,
    /// Relaxation after a quench of the steady state.
    Relax,
    /// Two-point-measurement work distribution of a quench.
    Workdist,
    /// Relative error of the work against the bound family per sweep point.
    Tur,
    /// Bound violations over Haar-random quenches.
    HaarScan,
    /// Work statistics of the closest separable state per sweep point.
    SepProject,
    /// Data behind one figure, with its parameters preset.
    Figure {
        #[arg(value_enum)]
        which: Figure,
    },
}

#[derive(Debug, Args)]
struct Opts {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    omega: Option<f64>,
    #[arg(long, global = true)]
    g: Option<f64>,
    #[arg(long, global = true)]
    beta_c: Option<f64>,
    #[arg(long, global = true)]
    beta_h: Option<f64>,
    #[arg(long, global = true)]
    nu_c: Option<f64>,
    #[arg(long, global = true)]
    nu_h: Option<f64>,
    #[arg(long, global = true, value_enum)]
    quench: Option<Quench>,
    /// Four rows of eight numbers (re,im pairs); used with `--quench file`.
    #[arg(long, global = true)]
    unitary_file: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `var:start:stop:points`, e.g. `g:0.1:0.9:17`.
    #[arg(long, global = true)]
    sweep: Option<Sweep>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true, env = "NESSTUR_JOBS")]
    jobs: Option<usize>,
    /// Number of Haar draws.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Trajectory length in relaxation times.
    #[arg(long, global = true)]
    t_end: Option<f64>,
    /// Trajectory samples, endpoints included.
    #[arg(long, global = true)]
    samples: Option<usize>,
}

impl Opts {
    fn settings(&self) -> Settings {
        Settings {
            omega: self.omega,
            g: self.g,
            beta_c: self.beta_c,
            beta_h: self.beta_h,
            nu_c: self.nu_c,
            nu_h: self.nu_h,
            quench: self.quench,
            unitary_file: self.unitary_file.clone(),
            seed: self.seed,
            sweep: self.sweep.clone(),
            out: self.out.clone(),
            format: self.format,
            jobs: self.jobs,
            n: self.n,
            t_end: self.t_end,
            samples: self.samples,
        }
    }
}

fn dispatch(command: Command, cfg: &RunConfig, stem: &str) -> Result<Outcome> {
    match command {
        Command::Ness => commands::ness(cfg, stem),
        Command::Relax => commands::relax(cfg, stem),
        Command::Workdist => commands::workdist(cfg, stem),
        Command::Tur => commands::tur(cfg, stem),
        Command::HaarScan => commands::haar_scan(cfg, stem),
        Command::SepProject => commands::sep_project(cfg, stem),
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let file = match &cli.opts.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let flags = cli.opts.settings();
    let panels: Vec<(Command, &str, Settings)> = match cli.command {
        Cmd::Ness => vec![(Command::Ness, "ness", Settings::default())],
        Cmd::Relax => vec![(Command::Relax, "relax", Settings::default())],
        Cmd::Workdist => vec![(Command::Workdist, "workdist", Settings::default())],
        Cmd::Tur => vec![(Command::Tur, "tur", Settings::default())],
        Cmd::HaarScan => vec![(Command::HaarScan, "haar_scan", Settings::default())],
        Cmd::SepProject => vec![(Command::SepProject, "sep_project", Settings::default())],
        Cmd::Figure { which } => {
            which.panels().into_iter().map(|p| (p.command, p.stem, p.preset)).collect()
        }
    };

    let configs = panels
        .into_iter()
        .map(|(command, stem, preset)| {
            let s = Settings::defaults().overlay(&preset).overlay(&file).overlay(&flags);
            Ok((command, stem, RunConfig::resolve(s)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (out_dir, format, jobs) = {
        let first = &configs[0].2;
        (first.out.clone(), first.format, first.jobs)
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build().context("starting the worker pool")?;
    let mut outcome = pool.install(|| -> Result<Outcome> {
        let mut acc = Outcome::default();
        for (command, stem, cfg) in &configs {
            acc.merge(dispatch(*command, cfg, stem)?);
        }
        Ok(acc)
    })?;

    let stem = configs[0].1.split('_').next().unwrap_or("run");
    if !outcome.warnings.is_empty() {
        let mut body = outcome.warnings.join("\n");
        body.push('\n');
        outcome.artifacts.push(Artifact::text(format!("{stem}_warnings"), body));
    }
    if !outcome.violations.is_empty() {
        let mut body = outcome.violations.join("\n");
        body.push('\n');
        outcome.artifacts.push(Artifact::text(format!("{stem}_violations"), body));
    }
    for path in output::write_all(&out_dir, &outcome.artifacts, format)? {
        println!("{}", path.display());
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if outcome.violations.is_empty() {
                ExitCode::SUCCESS
            } else {
                for v in &outcome.violations {
                    eprintln!("invariant violated: {v}");
                }
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
