//! Figure presets. Each preset sits between the defaults and the user's
//! config file, so file keys and flags still override it.

use clap::ValueEnum;

use crate::config::{Quench, Settings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ness,
    Relax,
    Workdist,
    Tur,
    HaarScan,
    SepProject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    #[value(name = "2a")]
    F2a,
    #[value(name = "2b")]
    F2b,
    #[value(name = "3")]
    F3,
    #[value(name = "4a")]
    F4a,
    #[value(name = "4b")]
    F4b,
    #[value(name = "4v")]
    F4v,
    #[value(name = "5")]
    F5,
    #[value(name = "6")]
    F6,
    #[value(name = "7")]
    F7,
    #[value(name = "8")]
    F8,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub command: Command,
    pub stem: &'static str,
    pub preset: Settings,
}

/// Coupled qubits between baths at `beta_c = 3`, `beta_h = 1`, unit frequency.
fn base(g: f64, nu_c: f64, nu_h: f64) -> Settings {
    Settings {
        omega: Some(1.0),
        g: Some(g),
        beta_c: Some(3.0),
        beta_h: Some(1.0),
        nu_c: Some(nu_c),
        nu_h: Some(nu_h),
        ..Settings::default()
    }
}

fn with(mut s: Settings, quench: Quench, sweep: Option<&str>) -> Settings {
    s.quench = Some(quench);
    s.sweep = sweep.map(|sw| sw.parse().expect("preset sweep is well formed"));
    s
}

const G_SWEEP: &str = "g:0.05:0.95:19";
const G_SWEEP_VIOLATION: &str = "g:0.1:0.9:17";
const G_SWEEP_FINE: &str = "g:0.01:0.99:99";

impl Figure {
    pub fn panels(self) -> Vec<Panel> {
        let relax = base(0.75, 0.004, 0.004);
        let sym = base(0.5, 0.004, 0.004);
        let violation = base(0.5, 0.002, 0.008);
        let p = |command, stem, preset| Panel { command, stem, preset };
        match self {
            Figure::F2a => vec![p(Command::Relax, "fig2a", with(relax, Quench::Swap, None))],
            Figure::F2b => vec![p(Command::Relax, "fig2b", with(relax, Quench::Maxwork, None))],
            Figure::F3 => vec![p(Command::Relax, "fig3", with(relax, Quench::Swap, None))],
            Figure::F4a => vec![p(Command::Tur, "fig4a", with(sym, Quench::Swap, Some(G_SWEEP)))],
            Figure::F4b => {
                vec![p(Command::Tur, "fig4b", with(sym, Quench::Maxwork, Some(G_SWEEP)))]
            }
            Figure::F4v => vec![p(
                Command::Tur,
                "fig4v",
                with(violation, Quench::Violation, Some(G_SWEEP_VIOLATION)),
            )],
            Figure::F5 => {
                let mut s = with(base(0.5, 0.012, 0.004), Quench::Haar, None);
                s.n = Some(100_000);
                vec![p(Command::HaarScan, "fig5", s)]
            }
            Figure::F6 => vec![p(Command::Ness, "fig6", with(sym, Quench::Swap, Some(G_SWEEP_FINE)))],
            Figure::F7 => vec![
                p(Command::SepProject, "fig7_swap", with(sym.clone(), Quench::Swap, Some(G_SWEEP))),
                p(Command::SepProject, "fig7_maxwork", with(sym, Quench::Maxwork, Some(G_SWEEP))),
                p(
                    Command::SepProject,
                    "fig7_violation",
                    with(violation, Quench::Violation, Some(G_SWEEP_VIOLATION)),
                ),
            ],
            Figure::F8 => {
                vec![p(Command::SepProject, "fig8", with(sym, Quench::Swap, Some(G_SWEEP)))]
            }
        }
    }
}
