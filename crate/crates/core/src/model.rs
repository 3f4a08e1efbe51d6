//! The resonant two-qubit system: Hamiltonian, eigensystem, bath rates, jump
//! operators, Liouvillian and its steady state.
//!
//! Natural units (`hbar = k_B = 1`). Qubit `c` is the first tensor factor and
//! couples to the cold bath, qubit `h` is the second and couples to the hot bath.
//! Computational ordering is `(|00>, |01>, |10>, |11>)` throughout.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DVector, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{self, real, ComplexMatrix, DensityMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bath {
    Cold,
    Hot,
}

impl Bath {
    pub const ALL: [Bath; 2] = [Bath::Cold, Bath::Hot];
}

/// Bath-induced transitions, labelled by the energy they carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    /// `Omega - g`
    Lower,
    /// `Omega + g`
    Upper,
}

impl Transition {
    pub const ALL: [Transition; 2] = [Transition::Lower, Transition::Upper];
}

/// Physical configuration. Constructed through [`SystemParams::new`], which
/// enforces `omega > 0`, `0 < g < omega`, `beta_c >= beta_h > 0` and positive
/// bath couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    omega: f64,
    g: f64,
    beta_c: f64,
    beta_h: f64,
    nu_c: f64,
    nu_h: f64,
}

/// Names of the parameters that may be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamName {
    Omega,
    G,
    BetaC,
    BetaH,
    NuC,
    NuH,
}

impl std::str::FromStr for ParamName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "omega" => ParamName::Omega,
            "g" => ParamName::G,
            "beta_c" | "beta-c" => ParamName::BetaC,
            "beta_h" | "beta-h" => ParamName::BetaH,
            "nu_c" | "nu-c" => ParamName::NuC,
            "nu_h" | "nu-h" => ParamName::NuH,
            other => return Err(Error::InvalidParams(format!("unknown parameter `{other}`"))),
        })
    }
}

impl SystemParams {
    pub fn new(omega: f64, g: f64, beta_c: f64, beta_h: f64, nu_c: f64, nu_h: f64) -> Result<Self> {
        let all = [omega, g, beta_c, beta_h, nu_c, nu_h];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        if omega <= 0.0 {
            return Err(Error::InvalidParams(format!("omega = {omega} must be positive")));
        }
        if !(g > 0.0 && g < omega) {
            return Err(Error::InvalidParams(format!(
                "coupling g = {g} must satisfy 0 < g < omega = {omega}"
            )));
        }
        if beta_h <= 0.0 {
            return Err(Error::InvalidParams(format!("beta_h = {beta_h} must be positive")));
        }
        if beta_c < beta_h {
            return Err(Error::InvalidParams(format!(
                "beta_c = {beta_c} must be >= beta_h = {beta_h} (bath c is the colder one)"
            )));
        }
        if nu_c <= 0.0 || nu_h <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "bath couplings must be positive (nu_c = {nu_c}, nu_h = {nu_h})"
            )));
        }
        Ok(Self { omega, g, beta_c, beta_h, nu_c, nu_h })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn g(&self) -> f64 {
        self.g
    }
    pub fn beta_c(&self) -> f64 {
        self.beta_c
    }
    pub fn beta_h(&self) -> f64 {
        self.beta_h
    }
    pub fn nu_c(&self) -> f64 {
        self.nu_c
    }
    pub fn nu_h(&self) -> f64 {
        self.nu_h
    }

    pub fn beta(&self, bath: Bath) -> f64 {
        match bath {
            Bath::Cold => self.beta_c,
            Bath::Hot => self.beta_h,
        }
    }

    pub fn nu(&self, bath: Bath) -> f64 {
        match bath {
            Bath::Cold => self.nu_c,
            Bath::Hot => self.nu_h,
        }
    }

    pub fn transition_energy(&self, t: Transition) -> f64 {
        match t {
            Transition::Lower => self.omega - self.g,
            Transition::Upper => self.omega + self.g,
        }
    }

    pub fn get(&self, name: ParamName) -> f64 {
        match name {
            ParamName::Omega => self.omega,
            ParamName::G => self.g,
            ParamName::BetaC => self.beta_c,
            ParamName::BetaH => self.beta_h,
            ParamName::NuC => self.nu_c,
            ParamName::NuH => self.nu_h,
        }
    }

    /// Copy with one parameter replaced, revalidated.
    pub fn with(&self, name: ParamName, value: f64) -> Result<Self> {
        let mut p = *self;
        match name {
            ParamName::Omega => p.omega = value,
            ParamName::G => p.g = value,
            ParamName::BetaC => p.beta_c = value,
            ParamName::BetaH => p.beta_h = value,
            ParamName::NuC => p.nu_c = value,
            ParamName::NuH => p.nu_h = value,
        }
        Self::new(p.omega, p.g, p.beta_c, p.beta_h, p.nu_c, p.nu_h)
    }
}

// --------------------------------------------------------------------------
// Hamiltonian and eigensystem
// --------------------------------------------------------------------------

/// Index of an energy eigenstate, in ascending energy order.
pub const GROUND: usize = 0;
pub const MINUS: usize = 1;
pub const PLUS: usize = 2;
pub const TOP: usize = 3;

/// Closed-form eigensystem of the resonant Hamiltonian.
#[derive(Debug, Clone)]
pub struct EnergyEigensystem {
    /// `(0, omega - g, omega + g, 2 omega)`
    pub energies: [f64; 4],
    /// Columns `|00>`, `(|01> - |10>)/sqrt2`, `(|01> + |10>)/sqrt2`, `|11>`.
    pub eigenvectors: ComplexMatrix,
}

/// Unitary whose columns are the energy eigenvectors (independent of `g`).
pub fn energy_basis() -> ComplexMatrix {
    let s = FRAC_1_SQRT_2;
    let mut v = ComplexMatrix::zeros(4, 4);
    v[(0, GROUND)] = real(1.0);
    v[(1, MINUS)] = real(s);
    v[(2, MINUS)] = real(-s);
    v[(1, PLUS)] = real(s);
    v[(2, PLUS)] = real(s);
    v[(3, TOP)] = real(1.0);
    v
}

pub fn energy_eigensystem(p: &SystemParams) -> EnergyEigensystem {
    EnergyEigensystem {
        energies: energies(p),
        eigenvectors: energy_basis(),
    }
}

pub fn energies(p: &SystemParams) -> [f64; 4] {
    [0.0, p.omega - p.g, p.omega + p.g, 2.0 * p.omega]
}

/// `H = omega (|1><1| x I + I x |1><1|) + g (|01><10| + |10><01|)`.
pub fn build_hamiltonian(p: &SystemParams) -> ComplexMatrix {
    hamiltonian_raw(p.omega, p.g)
}

fn hamiltonian_raw(omega: f64, g: f64) -> ComplexMatrix {
    let mut h = qmat::from_real_diagonal(&[0.0, omega, omega, 2.0 * omega]);
    h[(1, 2)] = real(g);
    h[(2, 1)] = real(g);
    h
}

/// Re-expresses an operator given in the energy eigenbasis in the
/// computational basis.
pub fn from_energy_basis(m: &ComplexMatrix) -> ComplexMatrix {
    let v = energy_basis();
    &v * m * v.adjoint()
}

pub fn to_energy_basis(m: &ComplexMatrix) -> ComplexMatrix {
    let v = energy_basis();
    v.adjoint() * m * &v
}

// --------------------------------------------------------------------------
// Rates and jump operators
// --------------------------------------------------------------------------

/// Ohmic rates for one bath and one transition energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rates {
    /// Absorption rate `nu eps / (e^{beta eps} - 1)`; multiplies `D[L^dagger]`.
    pub gamma: f64,
    /// Emission rate `nu eps e^{beta eps} / (e^{beta eps} - 1)`; multiplies `D[L]`.
    pub gamma_bar: f64,
}

pub fn transition_rates(p: &SystemParams, bath: Bath, eps: f64) -> Result<Rates> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidParams(format!("transition energy {eps} must be positive")));
    }
    Ok(ohmic_rates(p.nu(bath), p.beta(bath), eps))
}

fn ohmic_rates(nu: f64, beta: f64, eps: f64) -> Rates {
    let x = beta * eps;
    Rates {
        gamma: nu * eps / x.exp_m1(),
        gamma_bar: -nu * eps / (-x).exp_m1(),
    }
}

#[derive(Debug, Clone)]
pub struct JumpOperator {
    pub bath: Bath,
    pub transition: Transition,
    /// Energy removed from the system by `op`.
    pub energy: f64,
    /// Lowering operator in the computational basis.
    pub op: ComplexMatrix,
    pub rates: Rates,
}

#[derive(Debug, Clone)]
pub struct JumpOperatorSet {
    pub ops: Vec<JumpOperator>,
}

impl JumpOperatorSet {
    pub fn for_bath(&self, bath: Bath) -> impl Iterator<Item = &JumpOperator> {
        self.ops.iter().filter(move |j| j.bath == bath)
    }

    pub fn get(&self, bath: Bath, transition: Transition) -> &JumpOperator {
        self.ops
            .iter()
            .find(|j| j.bath == bath && j.transition == transition)
            .expect("all four channels are present")
    }
}

/// Matrix elements `(to, from, amplitude)` of each lowering operator in the
/// energy eigenbasis. These are the energy-resolved components of the local
/// lowering operators `sigma^-` of each qubit.
fn jump_elements(bath: Bath, transition: Transition) -> [(usize, usize, f64); 2] {
    let s = FRAC_1_SQRT_2;
    match (bath, transition) {
        (Bath::Cold, Transition::Lower) => [(PLUS, TOP, s), (GROUND, MINUS, -s)],
        (Bath::Cold, Transition::Upper) => [(MINUS, TOP, s), (GROUND, PLUS, s)],
        (Bath::Hot, Transition::Lower) => [(PLUS, TOP, s), (GROUND, MINUS, s)],
        (Bath::Hot, Transition::Upper) => [(MINUS, TOP, -s), (GROUND, PLUS, s)],
    }
}

/// Jump operator in the energy eigenbasis.
pub fn jump_operator_energy_basis(bath: Bath, transition: Transition) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(4, 4);
    for (to, from, amp) in jump_elements(bath, transition) {
        m[(to, from)] = real(amp);
    }
    m
}

pub fn jump_operators(p: &SystemParams) -> JumpOperatorSet {
    let mut ops = Vec::with_capacity(4);
    for bath in Bath::ALL {
        for transition in Transition::ALL {
            let energy = p.transition_energy(transition);
            ops.push(JumpOperator {
                bath,
                transition,
                energy,
                op: from_energy_basis(&jump_operator_energy_basis(bath, transition)),
                rates: ohmic_rates(p.nu(bath), p.beta(bath), energy),
            });
        }
    }
    JumpOperatorSet { ops }
}

// --------------------------------------------------------------------------
// Steady state
// --------------------------------------------------------------------------

/// Steady-state populations in the energy eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NessCoefficients {
    pub rho0: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub rho_2omega: f64,
}

impl NessCoefficients {
    /// Populations ordered by ascending energy.
    pub fn populations(&self) -> [f64; 4] {
        [self.rho0, self.rho_minus, self.rho_plus, self.rho_2omega]
    }

    pub fn from_populations(p: [f64; 4]) -> Self {
        Self { rho0: p[0], rho_minus: p[1], rho_plus: p[2], rho_2omega: p[3] }
    }

    /// The state in the computational basis.
    pub fn density_matrix(&self) -> DensityMatrix {
        let m = from_energy_basis(&qmat::from_real_diagonal(&self.populations()));
        DensityMatrix::from_hermitized(&m).expect("normalized nonnegative populations")
    }
}

/// Closed-form steady state of the global master equation.
pub fn ness_analytic(p: &SystemParams) -> NessCoefficients {
    let sum = |t: Transition| {
        let eps = p.transition_energy(t);
        let c = ohmic_rates(p.nu_c, p.beta_c, eps);
        let h = ohmic_rates(p.nu_h, p.beta_h, eps);
        (c.gamma + h.gamma, c.gamma_bar + h.gamma_bar)
    };
    let (up_lo, down_lo) = sum(Transition::Lower);
    let (up_hi, down_hi) = sum(Transition::Upper);

    let raw = [
        down_lo * down_hi,
        up_lo * down_hi,
        down_lo * up_hi,
        up_lo * up_hi,
    ];
    let norm: f64 = raw.iter().sum();
    NessCoefficients::from_populations(raw.map(|x| x / norm))
}

/// True iff the populations are non-increasing in energy.
pub fn passivity_check(c: &NessCoefficients) -> bool {
    c.rho_2omega <= c.rho_plus && c.rho_plus <= c.rho_minus && c.rho_minus <= c.rho0
}

// --------------------------------------------------------------------------
// Liouvillian
// --------------------------------------------------------------------------

/// Column-stacking vectorization.
pub fn vectorize(m: &ComplexMatrix) -> DVector<Complex64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &DVector<Complex64>, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// Superoperator of `X -> L X L^dagger - {L^dagger L, X}/2`.
fn dissipator_superop(l: &ComplexMatrix) -> ComplexMatrix {
    let d = l.nrows();
    let id = qmat::identity(d);
    let ldl = l.adjoint() * l;
    qmat::kron(&l.map(|z| z.conj()), l)
        - qmat::kron(&id, &ldl).scale(0.5)
        - qmat::kron(&ldl.transpose(), &id).scale(0.5)
}

/// Superoperator of `-i [H, X]`.
fn hamiltonian_superop(h: &ComplexMatrix) -> ComplexMatrix {
    let id = qmat::identity(h.nrows());
    (qmat::kron(&id, h) - qmat::kron(&h.transpose(), &id)) * Complex64::new(0.0, -1.0)
}

/// Dissipative part contributed by one bath.
pub fn bath_dissipator(p: &SystemParams, bath: Bath) -> ComplexMatrix {
    let jumps = jump_operators(p);
    let mut out = ComplexMatrix::zeros(16, 16);
    for j in jumps.for_bath(bath) {
        out += dissipator_superop(&j.op.adjoint()).scale(j.rates.gamma);
        out += dissipator_superop(&j.op).scale(j.rates.gamma_bar);
    }
    out
}

/// Full dissipative part (both baths), without the Hamiltonian commutator.
pub fn dissipator(p: &SystemParams) -> ComplexMatrix {
    bath_dissipator(p, Bath::Cold) + bath_dissipator(p, Bath::Hot)
}

/// Generator acting on column-stacked density matrices.
pub fn liouvillian(p: &SystemParams) -> ComplexMatrix {
    hamiltonian_superop(&build_hamiltonian(p)) + dissipator(p)
}

/// Eigenvalues of the Liouvillian from a complex Schur decomposition,
/// sorted by increasing magnitude.
pub fn liouvillian_spectrum(p: &SystemParams) -> Result<Vec<Complex64>> {
    let schur = Schur::try_new(liouvillian(p), f64::EPSILON, 10_000).ok_or(Error::NoConvergence)?;
    let (_, t) = schur.unpack();
    let mut eigs: Vec<Complex64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    eigs.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    Ok(eigs)
}

const NULL_EIGENVALUE_TOL: f64 = 1e-9;
const NULL_GAP_RATIO: f64 = 10.0;

/// Slowest decay rate: the smallest `|Re lambda|` among the non-stationary modes.
pub fn spectral_gap(p: &SystemParams) -> Result<f64> {
    let eigs = liouvillian_spectrum(p)?;
    check_unique_null(&eigs)?;
    Ok(eigs[1..]
        .iter()
        .map(|z| z.re.abs())
        .fold(f64::INFINITY, f64::min))
}

fn check_unique_null(eigs: &[Complex64]) -> Result<()> {
    let first = eigs[0].norm();
    let second = eigs[1].norm();
    if first >= NULL_EIGENVALUE_TOL {
        return Err(Error::DegenerateNullSpace(format!(
            "smallest |eigenvalue| = {first:e} is not zero"
        )));
    }
    if second < NULL_GAP_RATIO * first.max(NULL_EIGENVALUE_TOL) {
        return Err(Error::DegenerateNullSpace(format!(
            "second |eigenvalue| = {second:e} too close to zero"
        )));
    }
    Ok(())
}

/// Steady state from the kernel of the Liouvillian: the right singular vector
/// belonging to the smallest singular value, reshaped and trace-normalized.
pub fn ness_from_nullspace(p: &SystemParams) -> Result<DensityMatrix> {
    let eigs = liouvillian_spectrum(p)?;
    check_unique_null(&eigs)?;

    let l = liouvillian(p);
    let svd = l.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::NoConvergence)?;
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty spectrum");
    let null = DVector::from_iterator(16, v_t.row(k).iter().map(|z| z.conj()));
    let m = unvectorize(&null, 4);
    let tr = m.trace();
    DensityMatrix::from_hermitized(&m.map(|z| z / tr))
}
