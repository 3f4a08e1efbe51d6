//! Two-point-measurement work statistics and the quench unitaries.

use std::fmt::Write as _;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::dynamics::format_float;
use crate::error::{Error, Result};
use crate::model::{self, SystemParams, GROUND, MINUS, PLUS, TOP};
use crate::qmat::{self, c64, ComplexMatrix, DensityMatrix};

const UNITARY_TOL: f64 = 1e-10;
/// Atoms closer than `MERGE_REL_TOL * omega` are merged.
const MERGE_REL_TOL: f64 = 1e-9;
/// Atoms with total weight below this are dropped from the distribution.
const PROB_FLOOR: f64 = 1e-15;
const ZERO_MEAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorkAtom {
    pub w: f64,
    pub prob: f64,
}

/// Discrete work distribution, atoms sorted by increasing work.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkDistribution {
    pub atoms: Vec<WorkAtom>,
}

impl WorkDistribution {
    pub fn total_probability(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("w,prob\n");
        for a in &self.atoms {
            writeln!(out, "{},{}", format_float(a.w), format_float(a.prob)).expect("String write");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorkMoments {
    pub mean: f64,
    pub second: f64,
    pub variance: f64,
    /// `Var(W) / <W>^2`, absent when the mean work vanishes.
    pub rel_err_sq: Option<f64>,
}

impl WorkMoments {
    pub fn rel_err_sq(&self) -> Result<f64> {
        self.rel_err_sq.ok_or(Error::ZeroMeanWork(self.mean))
    }
}

/// `|<phi_m|U|phi_n>|^2` indexed `[m][n]` in the energy eigenbasis.
pub fn transition_probabilities(u: &ComplexMatrix) -> [[f64; 4]; 4] {
    let ue = model::to_energy_basis(u);
    std::array::from_fn(|m| std::array::from_fn(|n| ue[(m, n)].norm_sqr()))
}

/// Energy-basis populations `<phi_n|rho|phi_n>`; coherences are discarded, as
/// by the first projective measurement.
pub fn energy_populations(state: &DensityMatrix) -> [f64; 4] {
    let e = model::to_energy_basis(state.matrix());
    std::array::from_fn(|n| e[(n, n)].re)
}

pub fn tpm_distribution(
    p: &SystemParams,
    state: &DensityMatrix,
    u: &ComplexMatrix,
) -> Result<WorkDistribution> {
    if state.dim() != 4 {
        return Err(Error::Dimension { expected: 4, got: state.dim() });
    }
    if u.nrows() != 4 || u.ncols() != 4 {
        return Err(Error::Dimension { expected: 4, got: u.nrows().max(u.ncols()) });
    }
    qmat::ensure_unitary(u, UNITARY_TOL)?;

    let energies = model::energies(p);
    let pops = energy_populations(state);
    let trans = transition_probabilities(u);

    let mut raw: Vec<WorkAtom> = Vec::with_capacity(16);
    for (n, &pn) in pops.iter().enumerate() {
        for (m, row) in trans.iter().enumerate() {
            raw.push(WorkAtom { w: energies[m] - energies[n], prob: pn * row[n] });
        }
    }
    raw.sort_by(|a, b| a.w.total_cmp(&b.w));

    let tol = MERGE_REL_TOL * p.omega();
    let mut atoms: Vec<WorkAtom> = Vec::new();
    let mut anchor = f64::NEG_INFINITY;
    for a in raw {
        match atoms.last_mut() {
            Some(last) if a.w - anchor <= tol => last.prob += a.prob,
            _ => {
                anchor = a.w;
                atoms.push(a);
            }
        }
    }
    atoms.retain(|a| a.prob >= PROB_FLOOR);
    Ok(WorkDistribution { atoms })
}

pub fn work_moments(d: &WorkDistribution) -> WorkMoments {
    let mean: f64 = d.atoms.iter().map(|a| a.prob * a.w).sum();
    let second: f64 = d.atoms.iter().map(|a| a.prob * a.w * a.w).sum();
    let variance = second - mean * mean;
    let rel_err_sq = (mean.abs() > ZERO_MEAN_TOL).then(|| variance / (mean * mean));
    WorkMoments { mean, second, variance, rel_err_sq }
}

/// `Tr[H (U rho U^dagger - rho)]`, the unmeasured mean energy change.
pub fn mean_energy_change(p: &SystemParams, state: &DensityMatrix, u: &ComplexMatrix) -> f64 {
    let h = model::build_hamiltonian(p);
    let rho = state.matrix();
    (h * (qmat::conjugate(u, rho) - rho)).trace().re
}

// --------------------------------------------------------------------------
// Quench unitaries
// --------------------------------------------------------------------------

/// Unitary sending `|phi_n>` to `|phi_{perm[n]}>` (energy-basis permutation),
/// expressed in the computational basis.
pub fn permutation_unitary(perm: [usize; 4]) -> ComplexMatrix {
    let mut pe = ComplexMatrix::zeros(4, 4);
    for (n, &m) in perm.iter().enumerate() {
        pe[(m, n)] = qmat::real(1.0);
    }
    model::from_energy_basis(&pe)
}

/// Swaps the two entangled eigenstates, identity on `|00>` and `|11>`.
pub fn unitary_swap_entangled(_p: &SystemParams) -> ComplexMatrix {
    let mut perm = [GROUND, MINUS, PLUS, TOP];
    perm.swap(MINUS, PLUS);
    permutation_unitary(perm)
}

/// Reverses the energy ordering: `|phi_0> <-> |phi_2Omega>` and
/// `|phi_-> <-> |phi_+>`.
pub fn unitary_max_work(_p: &SystemParams) -> ComplexMatrix {
    permutation_unitary([TOP, PLUS, MINUS, GROUND])
}

/// Rounded entries of the violating unitary, rows and columns ordered
/// `(|11>, |10>, |01>, |00>)`.
#[rustfmt::skip]
const VIOLATION_ENTRIES: [[(f64, f64); 4]; 4] = [
    [(0.61214, -0.084476), (0.442141, -0.20187), (0.197476, -0.549142), (0.166498, -0.116762)],
    [(-0.000772, -0.210944), (0.125315, 0.662622), (-0.440385, -0.240318), (0.347386, 0.358276)],
    [(0.250147, -0.159182), (0.198848, 0.471307), (-0.095917, 0.135918), (-0.678087, -0.40366)],
    [(-0.691565, 0.086468), (0.190366, 0.105252), (0.175807, -0.590908), (-0.133258, -0.262879)],
];

/// The tabulated violating unitary re-indexed to `(|00>, |01>, |10>, |11>)`,
/// before any unitarity correction.
pub fn unitary_violation_rounded() -> ComplexMatrix {
    // Reversed ordering: tabulated index k is computational index 3 - k.
    ComplexMatrix::from_fn(4, 4, |i, j| {
        let (re, im) = VIOLATION_ENTRIES[3 - i][3 - j];
        c64(re, im)
    })
}

/// The violating unitary, made exactly unitary by polar decomposition.
pub fn unitary_violation() -> ComplexMatrix {
    qmat::polar_unitary(&unitary_violation_rounded())
}

/// Haar-distributed unitary from a seeded generator (QR of a complex Ginibre
/// matrix with the phases of `R`'s diagonal divided out).
pub fn haar_random_unitary(seed: u64, dim: usize) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_unitary_from_rng(&mut rng, dim)
}

pub fn haar_unitary_from_rng<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let z = ComplexMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    let phases = DVector::from_iterator(
        dim,
        (0..dim).map(|k| {
            let d = r[(k, k)];
            if d.norm() == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                d / d.norm()
            }
        }),
    );
    for (k, ph) in phases.iter().enumerate() {
        for i in 0..dim {
            q[(i, k)] *= ph;
        }
    }
    q
}
