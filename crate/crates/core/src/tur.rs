//! Thermodynamic uncertainty relations for the exchange scenario.
//!
//! Two bound families are available: `f0(x) = 2/(e^x - 1)` and the tighter
//! `f(x) = 1/sinh^2(y)` with `y tanh y = x/2`. Both are evaluated at the
//! relative-entropy and the cost-based entropy production of a quench.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{self, format_float, EvolveOptions, OpenSystem};
use crate::error::{Error, Result};
use crate::model::{self, NessCoefficients, SystemParams};
use crate::qmat::ComplexMatrix;
use crate::workstats;

/// A bound counts as violated when `lhs < bound - VIOLATION_SLACK`.
pub const VIOLATION_SLACK: f64 = 1e-12;
/// Haar draws with `|<W>|` below this are skipped by the scan.
pub const ZERO_MEAN_SKIP: f64 = 1e-10;
/// The swap certificate is not applicable when `|rho_- - rho_+|` is below this.
pub const DEGENERATE_GAP: f64 = 1e-15;

const ROOT_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 400;

fn check_domain(x: f64) -> Result<()> {
    if x > 0.0 && !x.is_nan() {
        Ok(())
    } else {
        Err(Error::BoundDomain(x))
    }
}

/// `2 / (e^x - 1)`.
pub fn bound_f0(x: f64) -> Result<f64> {
    check_domain(x)?;
    Ok(2.0 / x.exp_m1())
}

/// Unique positive root of `y tanh y = x/2`.
pub fn bound_f_root(x: f64) -> Result<f64> {
    check_domain(x)?;
    let target = 0.5 * x;
    let h = |y: f64| y * y.tanh() - target;

    // y tanh y <= y^2, so the lower end sits below the root.
    let mut lo = (0.5 * (0.5 * x).sqrt()).min(1e-8);
    // tanh y >= 1/2 for y >= 10, so y tanh y >= x/2 at y = max(10, x).
    let mut hi = x.max(10.0);
    debug_assert!(h(lo) <= 0.0 && h(hi) >= 0.0);

    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= ROOT_TOL * mid.max(1.0) {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut y = 0.5 * (lo + hi);
    for _ in 0..3 {
        let t = y.tanh();
        let slope = t + y * (1.0 - t * t);
        let next = y - h(y) / slope;
        if !(lo..=hi).contains(&next) {
            break;
        }
        y = next;
    }
    Ok(y)
}

/// `1 / sinh^2(y)` with `y tanh y = x/2`.
pub fn bound_f(x: f64) -> Result<f64> {
    let y = bound_f_root(x)?;
    Ok(y.sinh().powi(-2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurBounds {
    pub f0_rel: f64,
    pub f0_cost: f64,
    pub f_rel: f64,
    pub f_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TurViolations {
    pub f0_rel: bool,
    pub f0_cost: bool,
    pub f_rel: bool,
    pub f_cost: bool,
}

impl TurViolations {
    pub fn any(&self) -> bool {
        self.f0_rel || self.f0_cost || self.f_rel || self.f_cost
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TurReport {
    /// `Var(W) / <W>^2`.
    pub lhs: f64,
    pub mean_work: f64,
    pub sigma_rel: f64,
    pub sigma_cost: f64,
    pub bounds: TurBounds,
    pub violated: TurViolations,
}

impl TurReport {
    pub fn from_parts(lhs: f64, mean_work: f64, sigma_rel: f64, sigma_cost: f64) -> Result<Self> {
        let bounds = TurBounds {
            f0_rel: bound_f0(sigma_rel)?,
            f0_cost: bound_f0(sigma_cost)?,
            f_rel: bound_f(sigma_rel)?,
            f_cost: bound_f(sigma_cost)?,
        };
        let below = |b: f64| lhs < b - VIOLATION_SLACK;
        let violated = TurViolations {
            f0_rel: below(bounds.f0_rel),
            f0_cost: below(bounds.f0_cost),
            f_rel: below(bounds.f_rel),
            f_cost: below(bounds.f_cost),
        };
        Ok(Self { lhs, mean_work, sigma_rel, sigma_cost, bounds, violated })
    }
}

pub fn evaluate_tur(p: &SystemParams, u: &ComplexMatrix) -> Result<TurReport> {
    evaluate_tur_with(&OpenSystem::new(p)?, u, &EvolveOptions::default())
}

pub fn evaluate_tur_with(
    sys: &OpenSystem,
    u: &ComplexMatrix,
    opts: &EvolveOptions,
) -> Result<TurReport> {
    let p = sys.params();
    let ness = model::ness_analytic(p).density_matrix();
    let moments = workstats::work_moments(&workstats::tpm_distribution(p, &ness, u)?);
    let lhs = moments.rel_err_sq()?;
    let budget = dynamics::sigma_cost_with(sys, u, opts)?;
    TurReport::from_parts(lhs, moments.mean, budget.sigma_rel, budget.sigma_cost)
}

/// Outcome of the closed-form swap-quench TUR check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SwapCertificate {
    Holds { lhs: f64, rhs: f64 },
    Fails { lhs: f64, rhs: f64 },
    /// `rho_- = rho_+`: the swap does no work on average.
    NotApplicable,
}

impl SwapCertificate {
    pub fn holds(&self) -> bool {
        matches!(self, SwapCertificate::Holds { .. })
    }
}

/// Checks `Var(W)/<W>^2 >= f0(Sigma_rel)` for the swap quench directly from
/// the steady-state populations.
pub fn swap_tur_certificate(p: &SystemParams) -> SwapCertificate {
    swap_certificate_from(&model::ness_analytic(p))
}

pub fn swap_certificate_from(c: &NessCoefficients) -> SwapCertificate {
    let (m, q) = (c.rho_minus, c.rho_plus);
    let d = m - q;
    if d.abs() <= DEGENERATE_GAP {
        return SwapCertificate::NotApplicable;
    }
    // (m + q)/d^2 - 1 without cancellation: m + q - d^2 = s(1 - s) + 4mq.
    let s = m + q;
    let outside = c.rho0 + c.rho_2omega;
    let lhs = (s * outside + 4.0 * m * q) / (d * d);
    let sigma_rel = d * (m / q).ln();
    let rhs = 2.0 / sigma_rel.exp_m1();
    if lhs >= rhs {
        SwapCertificate::Holds { lhs, rhs }
    } else {
        SwapCertificate::Fails { lhs, rhs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRecord {
    pub draw: u64,
    pub lhs: f64,
    /// `f0(Sigma_rel)`.
    pub rhs: f64,
    /// `lhs - rhs`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    /// Number of draws kept (skipped draws excluded).
    pub n_samples: usize,
    pub n_skipped_zero_mean: usize,
    pub records: Vec<ScanRecord>,
    pub violation_fraction: f64,
    /// Most negative gap; positive when nothing is violated.
    pub max_violation: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSummary {
    pub n: usize,
    pub n_skipped_zero_mean: usize,
    pub violation_fraction: f64,
    pub max_violation: Option<f64>,
    pub seed: u64,
}

impl ScanResult {
    pub fn violators(&self) -> impl Iterator<Item = &ScanRecord> {
        self.records.iter().filter(|r| r.gap < 0.0)
    }

    pub fn summary(&self) -> ScanSummary {
        ScanSummary {
            n: self.n_samples,
            n_skipped_zero_mean: self.n_skipped_zero_mean,
            violation_fraction: self.violation_fraction,
            max_violation: self.max_violation,
            seed: self.seed,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lhs,rhs,gap\n");
        for r in &self.records {
            writeln!(out, "{},{},{}", format_float(r.lhs), format_float(r.rhs), format_float(r.gap))
                .expect("String write");
        }
        out
    }
}

/// Draw `i` uses seed `base_seed + i` (wrapping), so results do not depend on
/// the thread count.
pub fn haar_violation_scan(p: &SystemParams, n: usize, base_seed: u64) -> Result<ScanResult> {
    if n == 0 {
        return Err(Error::InvalidParams("scan needs at least one draw".into()));
    }
    let ness = model::ness_analytic(p);
    let outcomes: Vec<Option<ScanRecord>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let u = workstats::haar_random_unitary(base_seed.wrapping_add(i), 4);
            scan_draw(p, &ness, &u, i)
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(outcomes, base_seed))
}

/// Evaluates one quench for the scan; `None` marks a zero-mean draw.
pub fn scan_draw(
    p: &SystemParams,
    ness: &NessCoefficients,
    u: &ComplexMatrix,
    draw: u64,
) -> Result<Option<ScanRecord>> {
    let state = ness.density_matrix();
    let moments = workstats::work_moments(&workstats::tpm_distribution(p, &state, u)?);
    if moments.mean.abs() < ZERO_MEAN_SKIP {
        return Ok(None);
    }
    let lhs = moments.variance / (moments.mean * moments.mean);
    let sigma_rel = dynamics::quench_relative_entropy(&ness.populations(), u)?;
    let rhs = bound_f0(sigma_rel)?;
    Ok(Some(ScanRecord { draw, lhs, rhs, gap: lhs - rhs }))
}

fn aggregate(outcomes: Vec<Option<ScanRecord>>, seed: u64) -> ScanResult {
    let total = outcomes.len();
    let records: Vec<ScanRecord> = outcomes.into_iter().flatten().collect();
    let n_samples = records.len();
    let violations = records.iter().filter(|r| r.gap < 0.0).count();
    let max_violation = records.iter().map(|r| r.gap).reduce(f64::min);
    ScanResult {
        n_samples,
        n_skipped_zero_mean: total - n_samples,
        violation_fraction: if n_samples == 0 { 0.0 } else { violations as f64 / n_samples as f64 },
        max_violation,
        records,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat;
    use crate::workstats::{unitary_max_work, unitary_swap_entangled};

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let (a, b) = (lo.ln(), hi.ln());
        (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
    }

    #[test]
    fn f0_values() {
        assert!((bound_f0(3f64.ln()).unwrap() - 1.0).abs() < 1e-15);
        assert!((bound_f0(1.0).unwrap() - 1.163_953_413_738_653).abs() < 1e-12);
        assert!(bound_f0(800.0).unwrap() >= 0.0);
    }

    #[test]
    fn domain_errors() {
        for x in [0.0, -1.0, f64::NAN] {
            assert!(matches!(bound_f0(x), Err(Error::BoundDomain(_))));
            assert!(matches!(bound_f(x), Err(Error::BoundDomain(_))));
        }
    }

    #[test]
    fn root_solves_the_defining_equation() {
        for x in log_grid(1e-6, 50.0, 200) {
            let y = bound_f_root(x).unwrap();
            assert!((y * y.tanh() - 0.5 * x).abs() <= 1e-12 * x.max(1.0), "x = {x}");
        }
    }

    #[test]
    fn both_bounds_strictly_decrease_and_f_dominates() {
        let grid = log_grid(1e-6, 50.0, 400);
        let f0: Vec<f64> = grid.iter().map(|&x| bound_f0(x).unwrap()).collect();
        let f: Vec<f64> = grid.iter().map(|&x| bound_f(x).unwrap()).collect();
        for i in 1..grid.len() {
            assert!(f0[i] < f0[i - 1]);
            assert!(f[i] < f[i - 1]);
        }
        for (a, b) in f.iter().zip(&f0) {
            assert!(a >= b);
        }
    }

    #[test]
    fn f_asymptotics() {
        let large = bound_f(40.0).unwrap() / (4.0 * (-40f64).exp());
        assert!((large - 1.0).abs() < 0.01);
        let small = bound_f(1e-6).unwrap() / (2.0 / 1e-6);
        assert!((small - 1.0).abs() < 0.01);
    }

    #[test]
    fn report_flags_match_bounds() {
        let r = TurReport::from_parts(0.5, 1.0, 1.0, 2.0).unwrap();
        assert!(r.bounds.f_rel >= r.bounds.f0_rel);
        assert!(r.bounds.f_cost >= r.bounds.f0_cost);
        assert_eq!(r.violated.f0_rel, 0.5 < r.bounds.f0_rel - VIOLATION_SLACK);
        assert_eq!(r.violated.f_cost, 0.5 < r.bounds.f_cost - VIOLATION_SLACK);
        let json = serde_json::to_value(r).unwrap();
        for k in ["f0_rel", "f0_cost", "f_rel", "f_cost"] {
            assert!(json["bounds"][k].is_f64());
            assert!(json["violated"][k].is_boolean());
        }
    }

    fn fig4(g: f64) -> SystemParams {
        SystemParams::new(1.0, g, 3.0, 1.0, 0.004, 0.004).unwrap()
    }

    #[test]
    fn swap_certificate_matches_the_generic_evaluation() {
        let p = fig4(0.6);
        let ness = model::ness_analytic(&p).density_matrix();
        let u = unitary_swap_entangled(&p);
        let m = workstats::work_moments(&workstats::tpm_distribution(&p, &ness, &u).unwrap());
        let rhs = bound_f0(dynamics::sigma_rel(&p, &u).unwrap()).unwrap();
        match swap_tur_certificate(&p) {
            SwapCertificate::Holds { lhs, rhs: r } => {
                assert!((lhs - m.rel_err_sq.unwrap()).abs() < 1e-9 * lhs);
                assert!((r - rhs).abs() < 1e-9 * r);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn swap_certificate_on_the_g_grid() {
        for k in 1..10 {
            assert!(swap_tur_certificate(&fig4(0.1 * k as f64)).holds());
        }
    }

    #[test]
    fn equal_populations_are_not_applicable() {
        let c = NessCoefficients::from_populations([0.4, 0.2, 0.2, 0.2]);
        assert_eq!(swap_certificate_from(&c), SwapCertificate::NotApplicable);
    }

    #[test]
    fn max_work_is_more_precise_than_swap() {
        let p = fig4(0.5);
        let sys = OpenSystem::new(&p).unwrap();
        let opts = EvolveOptions::default();
        let swap = evaluate_tur_with(&sys, &unitary_swap_entangled(&p), &opts).unwrap();
        let maxw = evaluate_tur_with(&sys, &unitary_max_work(&p), &opts).unwrap();
        assert!(maxw.lhs < swap.lhs);
        assert!(!swap.violated.any() && !maxw.violated.any());
        assert!(swap.sigma_rel <= swap.sigma_cost);
    }

    #[test]
    fn identity_quench_has_undefined_lhs() {
        let p = fig4(0.5);
        let id = qmat::identity(4);
        assert!(matches!(evaluate_tur(&p, &id), Err(Error::ZeroMeanWork(_))));
    }

    #[test]
    fn scan_is_reproducible_and_consistent() {
        let p = SystemParams::new(1.0, 0.5, 3.0, 1.0, 0.012, 0.004).unwrap();
        let a = haar_violation_scan(&p, 300, 11).unwrap();
        let b = haar_violation_scan(&p, 300, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_samples + a.n_skipped_zero_mean, 300);
        let neg = a.records.iter().filter(|r| r.gap < 0.0).count();
        assert_eq!(a.violation_fraction, neg as f64 / a.n_samples as f64);
        assert_eq!(a.to_csv().lines().count(), a.n_samples + 1);
        assert!(a.to_csv().starts_with("lhs,rhs,gap\n"));
    }

    #[test]
    fn swap_draw_has_nonnegative_gap() {
        let p = SystemParams::new(1.0, 0.5, 3.0, 1.0, 0.012, 0.004).unwrap();
        let ness = model::ness_analytic(&p);
        let r = scan_draw(&p, &ness, &unitary_swap_entangled(&p), 0).unwrap().unwrap();
        assert!(r.gap >= 0.0);
    }

    #[test]
    fn zero_draws_is_an_error() {
        assert!(haar_violation_scan(&fig4(0.5), 0, 0).is_err());
    }
}
