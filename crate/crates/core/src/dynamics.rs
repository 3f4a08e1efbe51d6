//! Relaxation after a quench: master-equation right-hand side, heat currents,
//! entropy flow and production, and the two entropy quantifiers of a quench
//! (the excess production cost and the relative entropy to the steady state).
//!
//! Every jump operator lowers the energy by a fixed amount, so the dissipator
//! commutes with the free evolution `X -> e^{-iHt} X e^{iHt}`. Trajectories are
//! therefore integrated in the interaction picture, where the generator is the
//! dissipator alone and the step size is set by the slow bath rates; lab-frame
//! states are recovered exactly by rotating with the closed-form eigensystem.
//! [`Frame::Lab`] integrates the full Liouvillian instead and serves as a
//! cross-check.

use std::fmt::Write as _;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{self, Bath, SystemParams};
use crate::ode::{OdeOptions, Stepper};
use crate::qmat::{self, ComplexMatrix, DensityMatrix};
use crate::workstats;

/// Eigenvalues below this make `-Tr[rho' ln rho]` unreliable; the entropy rate
/// then falls back to a finite difference.
const FULL_RANK_CUTOFF: f64 = 1e-13;
const POSITIVITY_TOL: f64 = 1e-8;
const UNITARY_TOL: f64 = 1e-10;

/// Precomputed generator pieces for one parameter set.
#[derive(Debug, Clone)]
pub struct OpenSystem {
    params: SystemParams,
    hamiltonian: ComplexMatrix,
    energies: [f64; 4],
    basis: ComplexMatrix,
    liouvillian: ComplexMatrix,
    dissipator: ComplexMatrix,
    dissipator_cold: ComplexMatrix,
    dissipator_hot: ComplexMatrix,
    gap: f64,
}

impl OpenSystem {
    pub fn new(p: &SystemParams) -> Result<Self> {
        let dissipator_cold = model::bath_dissipator(p, Bath::Cold);
        let dissipator_hot = model::bath_dissipator(p, Bath::Hot);
        Ok(Self {
            params: *p,
            hamiltonian: model::build_hamiltonian(p),
            energies: model::energies(p),
            basis: model::energy_basis(),
            liouvillian: model::liouvillian(p),
            dissipator: &dissipator_cold + &dissipator_hot,
            dissipator_cold,
            dissipator_hot,
            gap: model::spectral_gap(p)?,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    /// Slowest relaxation rate of the Liouvillian.
    pub fn spectral_gap(&self) -> f64 {
        self.gap
    }

    pub fn relaxation_time(&self) -> f64 {
        1.0 / self.gap
    }

    fn apply(super_op: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
        model::unvectorize(&(super_op * model::vectorize(rho)), rho.nrows())
    }

    /// `d rho / dt`.
    pub fn rhs(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        Self::apply(&self.liouvillian, rho)
    }

    /// Dissipative part of `d rho / dt`, summed over both baths.
    pub fn dissipate(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        Self::apply(&self.dissipator, rho)
    }

    fn bath_superop(&self, bath: Bath) -> &ComplexMatrix {
        match bath {
            Bath::Cold => &self.dissipator_cold,
            Bath::Hot => &self.dissipator_hot,
        }
    }

    /// `J_alpha = Tr[H D_alpha(rho)]`, positive when energy flows into the system.
    pub fn heat_current(&self, rho: &ComplexMatrix, bath: Bath) -> f64 {
        let d = Self::apply(self.bath_superop(bath), rho);
        (&self.hamiltonian * d).trace().re
    }

    /// `beta_h J_h + beta_c J_c`.
    pub fn entropy_flow_rate(&self, rho: &ComplexMatrix) -> f64 {
        Bath::ALL
            .iter()
            .map(|&b| self.params.beta(b) * self.heat_current(rho, b))
            .sum()
    }

    /// `dS/dt = -Tr[rho' ln rho]`, or a symmetric finite difference of the von
    /// Neumann entropy along `rho +- h rho'` when `rho` is (nearly) singular.
    pub fn entropy_rate(&self, rho: &ComplexMatrix) -> Result<f64> {
        let eig = qmat::hermitian_eig(rho)?;
        // The commutator part drops out of -Tr[rho' ln rho].
        let rho_dot = self.dissipate(rho);
        if eig.eigenvalues[0] > FULL_RANK_CUTOFF {
            let log = eig.map_spectrum(f64::ln);
            return Ok(-(rho_dot * log).trace().re);
        }
        let h = 1e-5 * self.relaxation_time();
        let forward = qmat::hermitize(&(rho + rho_dot.scale(h)));
        let backward = qmat::hermitize(&(rho - rho_dot.scale(h)));
        let s_fwd = qmat::spectrum_entropy(&qmat::hermitian_eigenvalues(&forward)?);
        let s_bwd = qmat::spectrum_entropy(&qmat::hermitian_eigenvalues(&backward)?);
        Ok((s_fwd - s_bwd) / (2.0 * h))
    }

    /// `dS_i/dt = dS/dt - dS_e/dt`.
    pub fn entropy_production_rate(&self, rho: &ComplexMatrix) -> Result<f64> {
        Ok(self.entropy_rate(rho)? - self.entropy_flow_rate(rho))
    }

    /// `e^{-iHt}` from the closed-form eigensystem.
    pub fn propagator(&self, t: f64) -> ComplexMatrix {
        let phases = DVector::from_iterator(
            4,
            self.energies.iter().map(|&e| Complex64::from_polar(1.0, -e * t)),
        );
        &self.basis * ComplexMatrix::from_diagonal(&phases) * self.basis.adjoint()
    }

    fn sample(&self, t: f64, rho: DensityMatrix) -> Result<TrajectoryPoint> {
        let m = rho.matrix();
        let j_c = self.heat_current(m, Bath::Cold);
        let j_h = self.heat_current(m, Bath::Hot);
        let s_dot = self.entropy_rate(m)?;
        let s_e_dot = self.params.beta_c() * j_c + self.params.beta_h() * j_h;
        Ok(TrajectoryPoint { t, rho, j_c, j_h, s_dot, s_e_dot, s_i_dot: s_dot - s_e_dot })
    }
}

pub fn gksl_rhs(p: &SystemParams, rho: &DensityMatrix) -> ComplexMatrix {
    let l = model::liouvillian(p);
    model::unvectorize(&(l * model::vectorize(rho.matrix())), rho.dim())
}

pub fn heat_current(p: &SystemParams, rho: &DensityMatrix, bath: Bath) -> f64 {
    let d = model::bath_dissipator(p, bath);
    let h = model::build_hamiltonian(p);
    (h * OpenSystem::apply(&d, rho.matrix())).trace().re
}

pub fn entropy_flow_rate(p: &SystemParams, rho: &DensityMatrix) -> f64 {
    Bath::ALL.iter().map(|&b| p.beta(b) * heat_current(p, rho, b)).sum()
}

pub fn entropy_rate(p: &SystemParams, rho: &DensityMatrix) -> Result<f64> {
    OpenSystem::new(p)?.entropy_rate(rho.matrix())
}

pub fn entropy_production_rate(p: &SystemParams, rho: &DensityMatrix) -> Result<f64> {
    OpenSystem::new(p)?.entropy_production_rate(rho.matrix())
}

// --------------------------------------------------------------------------
// Trajectories
// --------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Integrate the dissipator alone and rotate with `e^{-iHt}` at samples.
    Interaction,
    /// Integrate the full Liouvillian.
    Lab,
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub frame: Frame,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, frame: Frame::Interaction }
    }
}

impl EvolveOptions {
    fn ode(&self) -> OdeOptions {
        OdeOptions { rtol: self.rtol, atol: self.atol, ..OdeOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sampling {
    /// `n >= 2` equally spaced times from 0 to `t_end` inclusive.
    Uniform(usize),
    /// Explicit strictly increasing times in `[0, t_end]`.
    Times(Vec<f64>),
    /// Every accepted integrator step.
    Steps,
}

#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub rho: DensityMatrix,
    pub j_c: f64,
    pub j_h: f64,
    pub s_dot: f64,
    pub s_e_dot: f64,
    pub s_i_dot: f64,
}

impl TrajectoryPoint {
    /// `(J_h - J_c) / 2`
    pub fn jdiff_half(&self) -> f64 {
        0.5 * (self.j_h - self.j_c)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: SystemParams,
    pub initial_state: DensityMatrix,
    pub points: Vec<TrajectoryPoint>,
}

pub const TRAJECTORY_CSV_HEADER: &str = "t,jc,jh,jdiff_half,sdot,sedot,sidot";

impl Trajectory {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.points.len() + 1));
        out.push_str(TRAJECTORY_CSV_HEADER);
        out.push('\n');
        for pt in &self.points {
            let row = [pt.t, pt.j_c, pt.j_h, pt.jdiff_half(), pt.s_dot, pt.s_e_dot, pt.s_i_dot];
            let cells: Vec<String> = row.iter().map(|&x| format_float(x)).collect();
            writeln!(out, "{}", cells.join(",")).expect("writing to a String");
        }
        out
    }
}

/// 17 significant digits, round-trip safe.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn pack(m: &ComplexMatrix, out: &mut [f64]) {
    for (k, z) in m.iter().enumerate() {
        out[2 * k] = z.re;
        out[2 * k + 1] = z.im;
    }
}

fn unpack(y: &[f64], dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |i, j| {
        let k = i + dim * j;
        Complex64::new(y[2 * k], y[2 * k + 1])
    })
}

/// Real-packed linear vector field `y' = G y` for a 16x16 complex generator.
fn linear_field(generator: &ComplexMatrix) -> impl FnMut(f64, &[f64], &mut [f64]) + '_ {
    move |_, y, dy| {
        let n = generator.nrows();
        for i in 0..n {
            let mut acc = Complex64::default();
            for j in 0..n {
                acc += generator[(i, j)] * Complex64::new(y[2 * j], y[2 * j + 1]);
            }
            dy[2 * i] = acc.re;
            dy[2 * i + 1] = acc.im;
        }
    }
}

fn sample_times(t_end: f64, sampling: &Sampling) -> Result<Option<Vec<f64>>> {
    if !t_end.is_finite() || t_end < 0.0 {
        return Err(Error::InvalidParams(format!("t_end = {t_end} must be finite and >= 0")));
    }
    match sampling {
        Sampling::Uniform(n) => {
            if *n < 2 {
                return Err(Error::InvalidParams("uniform sampling needs at least 2 points".into()));
            }
            Ok(Some(
                (0..*n)
                    .map(|k| if k + 1 == *n { t_end } else { t_end * k as f64 / (*n - 1) as f64 })
                    .collect(),
            ))
        }
        Sampling::Times(ts) => {
            if ts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidParams("sample times must be strictly increasing".into()));
            }
            if ts.iter().any(|&t| t < 0.0 || t > t_end) {
                return Err(Error::InvalidParams("sample times must lie in [0, t_end]".into()));
            }
            Ok(Some(ts.clone()))
        }
        Sampling::Steps => Ok(None),
    }
}

/// Relaxation of `rho0` under the master equation, sampled per `sampling`.
pub fn evolve(
    p: &SystemParams,
    rho0: &DensityMatrix,
    t_end: f64,
    sampling: &Sampling,
) -> Result<Trajectory> {
    evolve_with(&OpenSystem::new(p)?, rho0, t_end, sampling, &EvolveOptions::default())
}

pub fn evolve_with(
    sys: &OpenSystem,
    rho0: &DensityMatrix,
    t_end: f64,
    sampling: &Sampling,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if rho0.dim() != 4 {
        return Err(Error::Dimension { expected: 4, got: rho0.dim() });
    }
    let times = sample_times(t_end, sampling)?;

    let generator = match opts.frame {
        Frame::Interaction => &sys.dissipator,
        Frame::Lab => &sys.liouvillian,
    };
    let mut y0 = vec![0.0; 32];
    pack(rho0.matrix(), &mut y0);
    let mut stepper = Stepper::new(linear_field(generator), 0.0, y0, opts.ode());

    let to_lab = |t: f64, y: &[f64]| -> ComplexMatrix {
        let m = qmat::hermitize(&unpack(y, 4));
        match opts.frame {
            Frame::Lab => m,
            Frame::Interaction => qmat::hermitize(&qmat::conjugate(&sys.propagator(t), &m)),
        }
    };
    let record = |t: f64, y: &[f64]| -> Result<TrajectoryPoint> {
        let m = to_lab(t, y);
        let min = qmat::hermitian_eigenvalues(&m)?[0];
        if min < -POSITIVITY_TOL {
            return Err(Error::PositivityViolation { t, min_eigenvalue: min });
        }
        let rho = DensityMatrix::new(m)
            .map_err(|_| Error::PositivityViolation { t, min_eigenvalue: min })?;
        sys.sample(t, rho)
    };

    let mut points = Vec::new();
    match times {
        Some(ts) => {
            for &ts_k in &ts {
                while stepper.t() < ts_k {
                    stepper.advance(ts_k)?;
                    rehermitize(&mut stepper);
                }
                points.push(record(ts_k, stepper.y())?);
            }
        }
        None => {
            points.push(record(0.0, stepper.y())?);
            while stepper.t() < t_end {
                stepper.advance(t_end)?;
                rehermitize(&mut stepper);
                points.push(record(stepper.t(), stepper.y())?);
            }
        }
    }

    Ok(Trajectory { params: sys.params, initial_state: rho0.clone(), points })
}

fn rehermitize<F: FnMut(f64, &[f64], &mut [f64])>(stepper: &mut Stepper<F>) {
    let mut y = stepper.y().to_vec();
    pack(&qmat::hermitize(&unpack(&y, 4)), &mut y);
    stepper.set_state(y);
}

// --------------------------------------------------------------------------
// Entropy budget of a quench
// --------------------------------------------------------------------------

/// Entropy quantifiers of a quench `rho_ness -> U rho_ness U^dagger`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyBudget {
    /// Excess entropy production over the steady-state baseline, integrated
    /// over the full relaxation.
    pub sigma_cost: f64,
    /// `S(U rho_ness U^dagger || rho_ness)`.
    pub sigma_rel: f64,
    /// Time at which the relaxation was declared converged.
    pub horizon: f64,
}

/// Convergence thresholds for [`sigma_cost`].
const COST_RATE_REL_TOL: f64 = 1e-10;
const COST_RATE_ABS_FLOOR: f64 = 1e-15;
const COST_STATE_TOL: f64 = 1e-9;
/// Horizon limit in units of the relaxation time.
const COST_MAX_RELAXATION_TIMES: f64 = 400.0;

pub fn sigma_rel(p: &SystemParams, u: &ComplexMatrix) -> Result<f64> {
    quench_relative_entropy(&model::ness_analytic(p).populations(), u)
}

/// `S(U rho U^dagger || rho)` for `rho` diagonal in the energy basis with the
/// given populations. With `T[m][n] = |<m|U|n>|^2` doubly stochastic this is
/// `sum_{m,n} T[m][n] p_n ln(p_n / p_m)`, which never forms the logarithm of
/// an eigenvalue lost to roundoff.
pub fn quench_relative_entropy(pops: &[f64; 4], u: &ComplexMatrix) -> Result<f64> {
    qmat::ensure_unitary(u, UNITARY_TOL)?;
    let t = workstats::transition_probabilities(u);
    let mut s = 0.0;
    for (n, &pn) in pops.iter().enumerate() {
        if pn <= 0.0 {
            continue;
        }
        for (m, &pm) in pops.iter().enumerate() {
            let w = t[m][n] * pn;
            if m == n || w == 0.0 {
                continue;
            }
            if pm <= 0.0 {
                return Err(Error::SupportViolation);
            }
            s += w * (pn / pm).ln();
        }
    }
    Ok(s.max(0.0))
}

pub fn sigma_cost(p: &SystemParams, u: &ComplexMatrix) -> Result<EntropyBudget> {
    sigma_cost_with(&OpenSystem::new(p)?, u, &EvolveOptions::default())
}

/// Integrates `dS_i/dt(t) - dS_i/dt(infinity)` alongside the state (as an extra
/// component of the ODE, so the step-size controller also bounds the
/// quadrature error) until both the rate excess and the distance to the
/// steady state are negligible. The remaining exponential tail is added using
/// the spectral gap.
pub fn sigma_cost_with(
    sys: &OpenSystem,
    u: &ComplexMatrix,
    opts: &EvolveOptions,
) -> Result<EntropyBudget> {
    qmat::ensure_unitary(u, UNITARY_TOL)?;
    let p = sys.params;
    let ness = model::ness_analytic(&p).density_matrix();
    let quenched = ness.conjugate_by(u)?;
    let sigma_rel = quench_relative_entropy(&model::ness_analytic(&p).populations(), u)?;

    let s_i_inf = sys.entropy_production_rate(ness.matrix())?;
    let rate_tol = (COST_RATE_REL_TOL * s_i_inf.abs()).max(COST_RATE_ABS_FLOOR);
    let t_max = COST_MAX_RELAXATION_TIMES * sys.relaxation_time();

    let excess = |rho: &ComplexMatrix| -> f64 {
        // Positivity is preserved by the exact flow; a failed eigensolve
        // would surface as NaN and make the stepper shrink the step.
        sys.entropy_production_rate(rho).map(|r| r - s_i_inf).unwrap_or(f64::NAN)
    };

    let generator = match opts.frame {
        Frame::Interaction => &sys.dissipator,
        Frame::Lab => &sys.liouvillian,
    };
    let mut linear = linear_field(generator);
    let field = |t: f64, y: &[f64], dy: &mut [f64]| {
        linear(t, &y[..32], &mut dy[..32]);
        let rho = qmat::hermitize(&unpack(&y[..32], 4));
        dy[32] = excess(&rho);
    };

    let mut y0 = vec![0.0; 33];
    pack(quenched.matrix(), &mut y0[..32]);
    let mut stepper = Stepper::new(field, 0.0, y0, opts.ode());

    loop {
        let rho = qmat::hermitize(&unpack(&stepper.y()[..32], 4));
        // The steady state commutes with H, so the distance is frame independent.
        let dist = (&rho - ness.matrix()).norm();
        let rate = stepper.dy()[32];
        if dist < COST_STATE_TOL && rate.abs() < rate_tol {
            let tail = rate / sys.gap;
            return Ok(EntropyBudget {
                sigma_cost: stepper.y()[32] + tail,
                sigma_rel,
                horizon: stepper.t(),
            });
        }
        if stepper.t() >= t_max {
            return Err(Error::HorizonExceeded(stepper.t()));
        }
        stepper.advance(t_max)?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamName;
    use crate::workstats;

    fn fig2() -> SystemParams {
        SystemParams::new(1.0, 0.75, 3.0, 1.0, 0.004, 0.004).unwrap()
    }

    fn random_state(seed: u64) -> DensityMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = ComplexMatrix::from_fn(4, 4, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let m = &a * a.adjoint();
        let tr = m.trace();
        DensityMatrix::from_hermitized(&m.map(|z| z / tr)).unwrap()
    }

    #[test]
    fn rhs_vanishes_at_ness() {
        let p = fig2();
        let ness = model::ness_analytic(&p).density_matrix();
        assert!(gksl_rhs(&p, &ness).norm() < 1e-10);
    }

    #[test]
    fn rhs_is_traceless_and_hermitian() {
        let p = fig2();
        for seed in 0..10 {
            let rho = random_state(seed);
            let d = gksl_rhs(&p, &rho);
            assert!(d.trace().norm() < 1e-12);
            assert!(qmat::hermitian_defect(&d) < 1e-12);
        }
    }

    #[test]
    fn stationary_heat_balance() {
        let p = fig2();
        let ness = model::ness_analytic(&p).density_matrix();
        let jc = heat_current(&p, &ness, Bath::Cold);
        let jh = heat_current(&p, &ness, Bath::Hot);
        assert!((jc + jh).abs() < 1e-10);
        assert!(jh > 0.0);
        let sed = entropy_flow_rate(&p, &ness);
        assert!((sed - (p.beta_h() - p.beta_c()) * jh).abs() < 1e-12);
        assert!(sed < 0.0);
        let sid = entropy_production_rate(&p, &ness).unwrap();
        assert!((sid + sed).abs() < 1e-10);
        assert!(sid > 0.0);
        assert!(entropy_rate(&p, &ness).unwrap().abs() < 1e-9);
    }

    #[test]
    fn hot_bath_heats_across_grid() {
        for gi in 1..10 {
            for (bc, bh) in [(3.0, 1.0), (2.0, 0.5), (10.0, 1.0), (1.5, 1.4)] {
                let p = SystemParams::new(1.0, 0.1 * gi as f64, bc, bh, 0.004, 0.01).unwrap();
                let ness = model::ness_analytic(&p).density_matrix();
                assert!(heat_current(&p, &ness, Bath::Hot) > 0.0);
            }
        }
    }

    #[test]
    fn equal_temperatures_are_quiet() {
        let p = SystemParams::new(1.0, 0.4, 2.0, 2.0, 0.004, 0.006).unwrap();
        let gibbs = model::ness_analytic(&p).density_matrix();
        assert!(heat_current(&p, &gibbs, Bath::Cold).abs() < 1e-10);
        assert!(heat_current(&p, &gibbs, Bath::Hot).abs() < 1e-10);
        assert!(entropy_flow_rate(&p, &gibbs).abs() < 1e-12);
        assert!(entropy_production_rate(&p, &gibbs).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ness_trajectory_is_constant() {
        let p = fig2();
        let ness = model::ness_analytic(&p).density_matrix();
        let traj = evolve(&p, &ness, 500.0, &Sampling::Uniform(11)).unwrap();
        for pt in &traj.points {
            assert!((pt.rho.matrix() - ness.matrix()).norm() < 1e-9);
        }
    }

    #[test]
    fn interaction_frame_matches_lab_frame() {
        let p = fig2();
        let sys = OpenSystem::new(&p).unwrap();
        let rho0 = random_state(7);
        let sampling = Sampling::Uniform(6);
        let fast = evolve_with(&sys, &rho0, 60.0, &sampling, &EvolveOptions::default()).unwrap();
        let lab_opts = EvolveOptions { frame: Frame::Lab, ..EvolveOptions::default() };
        let slow = evolve_with(&sys, &rho0, 60.0, &sampling, &lab_opts).unwrap();
        for (a, b) in fast.points.iter().zip(&slow.points) {
            assert!((a.rho.matrix() - b.rho.matrix()).norm() < 1e-7, "t = {}", a.t);
            assert!((a.s_i_dot - b.s_i_dot).abs() < 1e-8);
        }
    }

    #[test]
    fn entropy_balance_and_first_law_along_trajectory() {
        let p = fig2();
        let sys = OpenSystem::new(&p).unwrap();
        let rho0 = random_state(11);
        let traj = evolve(&p, &rho0, 400.0, &Sampling::Uniform(41)).unwrap();
        for pt in &traj.points {
            assert!((pt.s_i_dot - (pt.s_dot - pt.s_e_dot)).abs() < 1e-9);
            assert!(pt.s_i_dot >= -1e-8);
            let du = (sys.hamiltonian() * sys.rhs(pt.rho.matrix())).trace().re;
            assert!((du - pt.j_c - pt.j_h).abs() < 1e-9);
        }
    }

    #[test]
    fn entropy_rate_matches_finite_difference() {
        let p = fig2();
        let rho0 = random_state(3);
        let h = 1e-3;
        for t in [0.5, 20.0, 150.0] {
            let traj =
                evolve(&p, &rho0, t + h, &Sampling::Times(vec![t - h, t, t + h])).unwrap();
            let s: Vec<f64> = traj.points.iter().map(|pt| qmat::von_neumann_entropy(&pt.rho)).collect();
            let fd = (s[2] - s[0]) / (2.0 * h);
            assert!((traj.points[1].s_dot - fd).abs() < 1e-6, "t = {t}");
        }
    }

    #[test]
    fn rank_deficient_entropy_rate_uses_fallback() {
        let p = fig2();
        let sys = OpenSystem::new(&p).unwrap();
        let pure = DensityMatrix::from_diagonal(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let rate = sys.entropy_rate(pure.matrix()).unwrap();
        assert!(rate.is_finite() && rate > 0.0);
    }

    #[test]
    fn relaxes_to_ness() {
        let p = fig2();
        let sys = OpenSystem::new(&p).unwrap();
        let rho0 = random_state(5);
        let t_end = 20.0 * sys.relaxation_time();
        let traj = evolve(&p, &rho0, t_end, &Sampling::Uniform(2)).unwrap();
        let ness = model::ness_analytic(&p).density_matrix();
        let last = traj.points.last().unwrap();
        assert!((last.rho.matrix() - ness.matrix()).norm() < 1e-8);
    }

    #[test]
    fn swap_quench_slows_the_net_current() {
        let p = fig2();
        let ness = model::ness_analytic(&p).density_matrix();
        let rho0 = ness.conjugate_by(&workstats::unitary_swap_entangled(&p)).unwrap();
        let sys = OpenSystem::new(&p).unwrap();
        let traj = evolve(&p, &rho0, 10.0 * sys.relaxation_time(), &Sampling::Uniform(400)).unwrap();
        let j_ness = heat_current(&p, &ness, Bath::Hot);
        let tau = sys.relaxation_time();
        // Slower for the whole visible transient; the late tail overshoots by
        // a fraction of a percent before settling.
        let mut deficit = 0.0;
        for w in traj.points.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.t <= tau {
                assert!(a.jdiff_half() < j_ness, "t = {}", a.t);
            }
            assert!(a.jdiff_half() - j_ness < 1e-2 * j_ness, "t = {}", a.t);
            deficit += 0.5 * (b.t - a.t) * (a.jdiff_half() + b.jdiff_half() - 2.0 * j_ness);
        }
        assert!(deficit < 0.0);
    }

    #[test]
    fn max_work_quench_heats_the_hot_bath_early() {
        let p = fig2();
        let ness = model::ness_analytic(&p).density_matrix();
        let rho0 = ness.conjugate_by(&workstats::unitary_max_work(&p)).unwrap();
        let traj = evolve(&p, &rho0, 100.0, &Sampling::Uniform(101)).unwrap();
        assert!(traj.points.iter().take(20).any(|pt| pt.jdiff_half() < 0.0));
    }

    #[test]
    fn identity_quench_costs_nothing() {
        let p = fig2();
        let budget = sigma_cost(&p, &qmat::identity(4)).unwrap();
        assert!(budget.sigma_cost.abs() < 1e-9);
        assert!(budget.sigma_rel.abs() < 1e-12);
        assert!(sigma_rel(&p, &qmat::identity(4)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn sigma_cost_is_area_under_excess_production() {
        let p = fig2();
        let sys = OpenSystem::new(&p).unwrap();
        let u = workstats::unitary_swap_entangled(&p);
        let budget = sigma_cost(&p, &u).unwrap();
        let ness = model::ness_analytic(&p).density_matrix();
        let s_inf = entropy_production_rate(&p, &ness).unwrap();
        let rho0 = ness.conjugate_by(&u).unwrap();
        let t_end = 40.0 * sys.relaxation_time();
        let traj = evolve(&p, &rho0, t_end, &Sampling::Uniform(20001)).unwrap();
        let area: f64 = traj
            .points
            .windows(2)
            .map(|w| 0.5 * (w[1].t - w[0].t) * (w[0].s_i_dot + w[1].s_i_dot - 2.0 * s_inf))
            .sum();
        assert!(
            (area - budget.sigma_cost).abs() < 1e-5 * budget.sigma_cost.abs().max(1e-3),
            "trapezoid {area} vs {}",
            budget.sigma_cost
        );
    }

    #[test]
    fn sigma_rel_swap_closed_form() {
        for g in [0.1, 0.4, 0.75, 0.9] {
            let p = fig2().with(ParamName::G, g).unwrap();
            let c = model::ness_analytic(&p);
            let want = (c.rho_plus - c.rho_minus) * (c.rho_plus / c.rho_minus).ln();
            let got = sigma_rel(&p, &workstats::unitary_swap_entangled(&p)).unwrap();
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn sigma_rel_matches_the_matrix_relative_entropy() {
        let p = fig2();
        let ness = model::ness_analytic(&p).density_matrix();
        for seed in 0..20 {
            let u = workstats::haar_random_unitary(seed, 4);
            let generic =
                qmat::quantum_relative_entropy(&ness.conjugate_by(&u).unwrap(), &ness).unwrap();
            assert!((sigma_rel(&p, &u).unwrap() - generic).abs() < 1e-10);
        }
    }

    #[test]
    fn sigma_rel_survives_tiny_populations() {
        let p = SystemParams::new(2.0, 1.9, 60.0, 20.0, 0.01, 0.01).unwrap();
        let c = model::ness_analytic(&p);
        assert!(c.rho_plus < 1e-20 * c.rho_minus);
        let want = (c.rho_minus - c.rho_plus) * (c.rho_minus / c.rho_plus).ln();
        let got = sigma_rel(&p, &workstats::unitary_swap_entangled(&p)).unwrap();
        assert!((got - want).abs() < 1e-10 * want.max(1.0));
    }

    #[test]
    fn sigma_rel_max_work_is_classical_kl() {
        let p = fig2();
        let pops = model::ness_analytic(&p).populations();
        let permuted = [pops[3], pops[2], pops[1], pops[0]];
        let kl: f64 = permuted.iter().zip(&pops).map(|(a, b)| a * (a / b).ln()).sum();
        let got = sigma_rel(&p, &workstats::unitary_max_work(&p)).unwrap();
        assert!((got - kl).abs() < 1e-10);
    }

    #[test]
    fn trajectory_csv_header() {
        let p = fig2();
        let ness = model::ness_analytic(&p).density_matrix();
        let traj = evolve(&p, &ness, 1.0, &Sampling::Uniform(3)).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,jc,jh,jdiff_half,sdot,sedot,sidot"));
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn bad_sampling_rejected() {
        let p = fig2();
        let ness = model::ness_analytic(&p).density_matrix();
        assert!(evolve(&p, &ness, 1.0, &Sampling::Uniform(1)).is_err());
        assert!(evolve(&p, &ness, 1.0, &Sampling::Times(vec![0.5, 0.2])).is_err());
        assert!(evolve(&p, &ness, 1.0, &Sampling::Times(vec![2.0])).is_err());
        assert!(evolve(&p, &ness, -1.0, &Sampling::Steps).is_err());
    }
}
