//! Dense complex matrices and the quantum-information primitives built on them.
//!
//! Everything here works for a generic small dimension `d`, but the bipartite
//! helpers (partial trace, partial transpose) assume two qubits in the
//! computational ordering `(|00>, |01>, |10>, |11>)` with the first tensor
//! factor as the most significant bit.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Eigenvalues at or below this value are treated as exact zeros in entropies.
pub const ENTROPY_CUTOFF: f64 = 1e-14;
/// Support threshold used by [`quantum_relative_entropy`].
pub const SUPPORT_CUTOFF: f64 = 1e-12;

const HERMITIAN_TOL: f64 = 1e-10;
const STATE_HERMITIAN_TOL: f64 = 1e-12;
const STATE_TRACE_TOL: f64 = 1e-10;
const STATE_PSD_TOL: f64 = 1e-10;
const DEGENERACY_TOL: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

pub fn from_real_diagonal(diag: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_diagonal(&DVector::from_iterator(
        diag.len(),
        diag.iter().map(|&x| real(x)),
    ))
}

/// Projector `|v><v|`.
pub fn projector(v: &DVector<Complex64>) -> ComplexMatrix {
    v * v.adjoint()
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.trace()
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest entry of `|m - m^dagger|`.
pub fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// `||U^dagger U - I||_2` (Frobenius).
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    (u.adjoint() * u - identity(u.nrows())).norm()
}

pub fn ensure_unitary(u: &ComplexMatrix, tol: f64) -> Result<()> {
    let defect = unitarity_defect(u);
    if defect <= tol {
        Ok(())
    } else {
        Err(Error::NotUnitary(defect))
    }
}

/// Closest unitary in Frobenius norm (unitary factor of the polar decomposition).
pub fn polar_unitary(m: &ComplexMatrix) -> ComplexMatrix {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd requested U");
    let v_t = svd.v_t.expect("svd requested V^dagger");
    u * v_t
}

/// Conjugation `u m u^dagger`.
pub fn conjugate(u: &ComplexMatrix, m: &ComplexMatrix) -> ComplexMatrix {
    u * m * u.adjoint()
}

// --------------------------------------------------------------------------
// Density matrices
// --------------------------------------------------------------------------

/// A validated density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    /// Validates `m` against the density-matrix invariants without modifying it.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension { expected: m.nrows(), got: m.ncols() });
        }
        if !is_finite(&m) {
            return Err(Error::NonFinite);
        }
        let herm = hermitian_defect(&m);
        if herm > STATE_HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (defect {herm:e})")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > STATE_TRACE_TOL || tr.im.abs() > STATE_TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let eig = hermitian_eig(&m)?;
        let min = eig.eigenvalues[0];
        if min < -STATE_PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self(m))
    }

    /// Symmetrizes `(m + m^dagger)/2` before validating.
    pub fn from_hermitized(m: &ComplexMatrix) -> Result<Self> {
        Self::new(hermitize(m))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(identity(dim).unscale(dim as f64))
    }

    /// Pure state `|v><v|` for a (not necessarily normalized) nonzero vector.
    pub fn pure(v: &DVector<Complex64>) -> Result<Self> {
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let v = v.unscale(norm);
        Self::from_hermitized(&projector(&v))
    }

    pub fn from_diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(from_real_diagonal(probs))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// `u rho u^dagger` for a unitary `u`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: u.nrows() });
        }
        Self::from_hermitized(&conjugate(u, &self.0))
    }

    pub fn eig(&self) -> Result<HermitianEig> {
        hermitian_eig(&self.0)
    }
}

impl AsRef<ComplexMatrix> for DensityMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.0
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serialize_matrix(&self.0, serializer)
    }
}

/// Serializes a complex matrix as row-major nested `[re, im]` pairs.
pub fn serialize_matrix<S: Serializer>(
    m: &ComplexMatrix,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect();
    rows.serialize(serializer)
}

// --------------------------------------------------------------------------
// Hermitian eigendecomposition
// --------------------------------------------------------------------------

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_spectrum(|x| x)
    }

    /// `V f(diag(lambda)) V^dagger`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let fl = f(lam);
            scaled.column_mut(j).scale_mut(fl);
        }
        scaled * v.adjoint()
    }
}

pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEig> {
    if !m.is_square() {
        return Err(Error::Dimension { expected: m.nrows(), got: m.ncols() });
    }
    if !is_finite(m) {
        return Err(Error::NonFinite);
    }
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(hermitize(m), f64::EPSILON, 1000 * n.max(1))
        .ok_or(Error::NoConvergence)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }

    // Re-orthonormalize within (near-)degenerate blocks.
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n
            && (eigenvalues[end] - eigenvalues[start]).abs()
                <= DEGENERACY_TOL * eigenvalues[start].abs().max(1.0)
        {
            end += 1;
        }
        if end - start > 1 {
            gram_schmidt_columns(&mut eigenvectors, start, end);
        }
        start = end;
    }

    Ok(HermitianEig { eigenvalues, eigenvectors })
}

fn gram_schmidt_columns(v: &mut ComplexMatrix, start: usize, end: usize) {
    for j in start..end {
        let mut col = v.column(j).into_owned();
        for k in start..j {
            let prev = v.column(k).into_owned();
            let overlap = prev.dotc(&col);
            col -= prev * overlap;
        }
        let norm = col.norm();
        v.set_column(j, &col.unscale(norm));
    }
}

/// Spectrum of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(hermitian_eig(m)?.eigenvalues)
}

/// Matrix logarithm of a positive definite Hermitian matrix; eigenvalues at or
/// below [`ENTROPY_CUTOFF`] are mapped to zero instead of `-inf`.
pub fn log_hermitian(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(m)?;
    Ok(eig.map_spectrum(|x| if x > ENTROPY_CUTOFF { x.ln() } else { 0.0 }))
}

// --------------------------------------------------------------------------
// Two-qubit bipartite operations
// --------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

fn ensure_two_qubit(m: &ComplexMatrix) -> Result<()> {
    if m.nrows() != 4 || m.ncols() != 4 {
        return Err(Error::Dimension { expected: 4, got: m.nrows().max(m.ncols()) });
    }
    Ok(())
}

/// Traces out `traced` and returns the reduced state of the other qubit.
pub fn partial_trace(rho: &DensityMatrix, traced: Subsystem) -> Result<DensityMatrix> {
    let m = rho.matrix();
    ensure_two_qubit(m)?;
    let mut out = ComplexMatrix::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = Complex64::default();
            for k in 0..2 {
                acc += match traced {
                    Subsystem::Second => m[(2 * i + k, 2 * j + k)],
                    Subsystem::First => m[(2 * k + i, 2 * k + j)],
                };
            }
            out[(i, j)] = acc;
        }
    }
    DensityMatrix::from_hermitized(&out)
}

/// Partial transpose on the second qubit: `<a b|X^PT|a' b'> = <a b'|X|a' b>`.
pub fn partial_transpose(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_two_qubit(m)?;
    let mut out = ComplexMatrix::zeros(4, 4);
    for a in 0..2 {
        for b in 0..2 {
            for a2 in 0..2 {
                for b2 in 0..2 {
                    out[(2 * a + b, 2 * a2 + b2)] = m[(2 * a + b2, 2 * a2 + b)];
                }
            }
        }
    }
    Ok(out)
}

// --------------------------------------------------------------------------
// Entropies and distances
// --------------------------------------------------------------------------

/// Shannon entropy (nats) of a spectrum, dropping entries at or below the cutoff.
pub fn spectrum_entropy(spectrum: &[f64]) -> f64 {
    spectrum
        .iter()
        .filter(|&&p| p > ENTROPY_CUTOFF)
        .map(|&p| -p * p.ln())
        .sum()
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    // Eigendecomposition cannot fail on a validated state.
    let eig = rho.eig().expect("validated density matrix");
    spectrum_entropy(&eig.eigenvalues)
}

/// `S(rho || sigma) = Tr[rho (ln rho - ln sigma)]` in nats.
pub fn quantum_relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension { expected: rho.dim(), got: sigma.dim() });
    }
    let rho_eig = rho.eig()?;
    let sigma_eig = sigma.eig()?;

    let neg_entropy: f64 = rho_eig
        .eigenvalues
        .iter()
        .filter(|&&p| p > ENTROPY_CUTOFF)
        .map(|&p| p * p.ln())
        .sum();

    // Tr[rho ln sigma] = sum_j ln(mu_j) <v_j|rho|v_j>
    let mut cross = 0.0;
    for (j, &mu) in sigma_eig.eigenvalues.iter().enumerate() {
        let v = sigma_eig.eigenvectors.column(j);
        let weight = (v.adjoint() * rho.matrix() * v)[(0, 0)].re;
        if mu <= SUPPORT_CUTOFF {
            if weight > SUPPORT_CUTOFF {
                return Err(Error::SupportViolation);
            }
            continue;
        }
        cross += weight * mu.ln();
    }
    Ok((neg_entropy - cross).max(0.0))
}

/// `Tr(rho^2)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.matrix().iter().map(|z| z.norm_sqr()).sum()
}

pub fn frobenius_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension { expected: a.nrows(), got: b.nrows() });
    }
    Ok((a - b).norm())
}
