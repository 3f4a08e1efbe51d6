//! Run configuration: built-in defaults, then an optional preset, then a
//! `key = value` file, then command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use nesstur_core::model::{ParamName, SystemParams};
use nesstur_core::qmat::{self, c64, ComplexMatrix};
use nesstur_core::workstats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quench {
    Swap,
    Maxwork,
    Violation,
    Haar,
    File,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Linear sweep of one parameter, `var:start:stop:points`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub var: ParamName,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl FromStr for Sweep {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [var, start, stop, points] = parts[..] else {
            bail!("sweep must look like var:start:stop:points, got {s:?}");
        };
        let var = ParamName::from_str(var).map_err(|e| anyhow!("{e}"))?;
        if var == ParamName::Omega {
            bail!("omega cannot be swept; sweep g or a bath parameter instead");
        }
        let start: f64 = start.parse().with_context(|| format!("sweep start {start:?}"))?;
        let stop: f64 = stop.parse().with_context(|| format!("sweep stop {stop:?}"))?;
        let points: usize = points.parse().with_context(|| format!("sweep points {points:?}"))?;
        if points == 0 {
            bail!("sweep needs at least one point");
        }
        if !start.is_finite() || !stop.is_finite() {
            bail!("sweep bounds must be finite");
        }
        Ok(Self { var, start, stop, points })
    }
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + step * i as f64).collect()
    }
}

/// Unvalidated settings; `None` means "not set at this layer".
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub omega: Option<f64>,
    pub g: Option<f64>,
    pub beta_c: Option<f64>,
    pub beta_h: Option<f64>,
    pub nu_c: Option<f64>,
    pub nu_h: Option<f64>,
    pub quench: Option<Quench>,
    pub unitary_file: Option<PathBuf>,
    pub seed: Option<u64>,
    pub sweep: Option<Sweep>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: Option<usize>,
    pub n: Option<usize>,
    pub t_end: Option<f64>,
    pub samples: Option<usize>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($field:ident),*) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )*
    };
}

impl Settings {
    /// Fields set in `top` win.
    pub fn overlay(mut self, top: &Settings) -> Settings {
        overlay!(
            self, top, omega, g, beta_c, beta_h, nu_c, nu_h, quench, unitary_file, seed, sweep,
            out, format, jobs, n, t_end, samples
        );
        self
    }

    pub fn defaults() -> Settings {
        Settings {
            omega: Some(1.0),
            g: Some(0.5),
            beta_c: Some(3.0),
            beta_h: Some(1.0),
            nu_c: Some(0.004),
            nu_h: Some(0.004),
            quench: Some(Quench::Swap),
            seed: Some(1),
            out: Some(PathBuf::from(".")),
            format: Some(Format::Csv),
            n: Some(1000),
            t_end: Some(10.0),
            samples: Some(400),
            ..Settings::default()
        }
    }

    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config file {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Settings> {
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim().replace('-', "_");
            if seen.insert(key.clone(), value.trim().to_string()).is_some() {
                bail!("line {}: duplicate key {key:?}", lineno + 1);
            }
        }
        let mut s = Settings::default();
        for (key, value) in &seen {
            let v = value.as_str();
            let ctx = || format!("key {key:?} = {v:?}");
            match key.as_str() {
                "omega" => s.omega = Some(v.parse().with_context(ctx)?),
                "g" => s.g = Some(v.parse().with_context(ctx)?),
                "beta_c" => s.beta_c = Some(v.parse().with_context(ctx)?),
                "beta_h" => s.beta_h = Some(v.parse().with_context(ctx)?),
                "nu_c" => s.nu_c = Some(v.parse().with_context(ctx)?),
                "nu_h" => s.nu_h = Some(v.parse().with_context(ctx)?),
                "quench" => {
                    s.quench = Some(Quench::from_str(v, true).map_err(|e| anyhow!(e)).with_context(ctx)?)
                }
                "unitary_file" => s.unitary_file = Some(PathBuf::from(v)),
                "seed" => s.seed = Some(v.parse().with_context(ctx)?),
                "sweep" => s.sweep = Some(v.parse().with_context(ctx)?),
                "out" => s.out = Some(PathBuf::from(v)),
                "format" => {
                    s.format = Some(Format::from_str(v, true).map_err(|e| anyhow!(e)).with_context(ctx)?)
                }
                "jobs" => s.jobs = Some(v.parse().with_context(ctx)?),
                "n" => s.n = Some(v.parse().with_context(ctx)?),
                "t_end" => s.t_end = Some(v.parse().with_context(ctx)?),
                "samples" => s.samples = Some(v.parse().with_context(ctx)?),
                other => bail!("unknown key {other:?}"),
            }
        }
        Ok(s)
    }
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: SystemParams,
    pub quench: Quench,
    pub unitary: ComplexMatrix,
    pub seed: u64,
    pub sweep: Option<Sweep>,
    /// Parameter sets for every sweep point (one entry without a sweep).
    pub points: Vec<SystemParams>,
    pub out: PathBuf,
    pub format: Format,
    pub jobs: Option<usize>,
    /// Draws for Haar scans.
    pub n: usize,
    /// Trajectory length in relaxation times.
    pub t_end: f64,
    pub samples: usize,
}

const FILE_UNITARY_TOL: f64 = 1e-8;

impl RunConfig {
    pub fn resolve(s: Settings) -> Result<RunConfig> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| anyhow!("missing {name}"));
        let params = SystemParams::new(
            need(s.omega, "omega")?,
            need(s.g, "g")?,
            need(s.beta_c, "beta_c")?,
            need(s.beta_h, "beta_h")?,
            need(s.nu_c, "nu_c")?,
            need(s.nu_h, "nu_h")?,
        )
        .map_err(|e| anyhow!("invalid parameters: {e}"))?;

        let points = match &s.sweep {
            None => vec![params],
            Some(sw) => sw
                .values()
                .into_iter()
                .map(|v| {
                    params
                        .with(sw.var, v)
                        .map_err(|e| anyhow!("sweep point {:?}={v}: {e}", sw.var))
                })
                .collect::<Result<_>>()?,
        };

        let quench = s.quench.unwrap_or(Quench::Swap);
        let seed = s.seed.unwrap_or(1);
        let unitary = match quench {
            Quench::File => {
                let path = s
                    .unitary_file
                    .as_ref()
                    .ok_or_else(|| anyhow!("quench = file needs --unitary-file"))?;
                load_unitary(path)?
            }
            Quench::Haar => workstats::haar_random_unitary(seed, 4),
            _ => ComplexMatrix::identity(4, 4),
        };

        let samples = s.samples.unwrap_or(400);
        if samples < 2 {
            bail!("samples must be at least 2");
        }
        let t_end = s.t_end.unwrap_or(10.0);
        if !(t_end > 0.0 && t_end.is_finite()) {
            bail!("t_end must be positive, got {t_end}");
        }
        let n = s.n.unwrap_or(1000);
        if n == 0 {
            bail!("n must be at least 1");
        }
        if s.jobs == Some(0) {
            bail!("jobs must be at least 1");
        }
        Ok(RunConfig {
            params,
            quench,
            unitary,
            seed,
            sweep: s.sweep,
            points,
            out: s.out.unwrap_or_else(|| PathBuf::from(".")),
            format: s.format.unwrap_or(Format::Csv),
            jobs: s.jobs,
            n,
            t_end,
            samples,
        })
    }

    /// The configured quench for parameters `p`.
    pub fn unitary_for(&self, p: &SystemParams) -> ComplexMatrix {
        match self.quench {
            Quench::Swap => workstats::unitary_swap_entangled(p),
            Quench::Maxwork => workstats::unitary_max_work(p),
            Quench::Violation => workstats::unitary_violation(),
            Quench::Identity => qmat::identity(4),
            Quench::Haar | Quench::File => self.unitary.clone(),
        }
    }

    pub fn reject_sweep(&self, command: &str) -> Result<()> {
        if self.sweep.is_some() {
            bail!("{command} does not take a sweep");
        }
        Ok(())
    }
}

/// Reads a 4x4 unitary written as four lines of `re,im` pairs (eight numbers
/// per line, separated by commas or whitespace).
pub fn load_unitary(path: &Path) -> Result<ComplexMatrix> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading unitary file {}", path.display()))?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().with_context(|| format!("bad number {t:?}")))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    if rows.len() != 4 || rows.iter().any(|r| r.len() != 8) {
        bail!("unitary file must have 4 rows of 8 numbers (re,im pairs)");
    }
    let u = ComplexMatrix::from_fn(4, 4, |i, j| c64(rows[i][2 * j], rows[i][2 * j + 1]));
    qmat::ensure_unitary(&u, FILE_UNITARY_TOL).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok(qmat::polar_unitary(&u))
}
