//! Entanglement of the two-qubit state and its effect on work statistics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{self, NessCoefficients, SystemParams};
use crate::qmat::{self, c64, ComplexMatrix, DensityMatrix, Subsystem};
use crate::workstats::{self, WorkMoments};

/// Eigenvalues of a partial transpose above `-PPT_TOL` count as nonnegative.
pub const PPT_TOL: f64 = 1e-10;

fn sigma_y_sigma_y() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(0, 3)] = c64(-1.0, 0.0);
    m[(1, 2)] = c64(1.0, 0.0);
    m[(2, 1)] = c64(1.0, 0.0);
    m[(3, 0)] = c64(-1.0, 0.0);
    m
}

/// Wootters concurrence.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::Dimension { expected: 4, got: rho.dim() });
    }
    // sqrt(rho) Y rho* Y sqrt(rho) = A A^dagger with A = sqrt(rho) Y sqrt(rho)*,
    // so the square roots of its eigenvalues are the singular values of A.
    let sqrt_rho = rho.eig()?.map_spectrum(|x| x.max(0.0).sqrt());
    let a = &sqrt_rho * sigma_y_sigma_y() * sqrt_rho.conjugate();
    let mut lambda: Vec<f64> = a.singular_values().iter().copied().collect();
    lambda.sort_by(|a, b| b.total_cmp(a));
    Ok((lambda[0] - lambda[1] - lambda[2] - lambda[3]).max(0.0))
}

/// `S(rho_A) + S(rho_B) - S(rho)` in nats.
pub fn mutual_information(rho: &DensityMatrix) -> Result<f64> {
    let a = qmat::partial_trace(rho, Subsystem::Second)?;
    let b = qmat::partial_trace(rho, Subsystem::First)?;
    let mi = qmat::von_neumann_entropy(&a) + qmat::von_neumann_entropy(&b)
        - qmat::von_neumann_entropy(rho);
    Ok(mi.max(0.0))
}

pub fn min_partial_transpose_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    let pt = qmat::partial_transpose(m)?;
    Ok(qmat::hermitian_eigenvalues(&qmat::hermitize(&pt))?[0])
}

pub fn is_ppt(m: &ComplexMatrix) -> Result<bool> {
    Ok(min_partial_transpose_eigenvalue(m)? >= -PPT_TOL)
}

/// `(rho_- - rho_+)^2 > 4 rho_0 rho_2Omega`.
pub fn criterion_populations(c: &NessCoefficients) -> bool {
    let d = c.rho_minus - c.rho_plus;
    d * d > 4.0 * c.rho0 * c.rho_2omega
}

/// `2 gamma > 2 (xi - 1)^2 + xi^2` with `xi = <W^2>/(4g^2)` under the swap
/// quench and `gamma` the purity.
pub fn criterion_thermo(xi: f64, gamma: f64) -> bool {
    2.0 * gamma > 2.0 * (xi - 1.0).powi(2) + xi * xi
}

/// [`criterion_thermo`] rearranged as `4 xi - 3 xi^2 > 2 (1 - gamma)`, which
/// keeps its resolution when the state is nearly pure.
pub fn criterion_thermo_mixedness(xi: f64, linear_entropy: f64) -> bool {
    xi * (4.0 - 3.0 * xi) > 2.0 * linear_entropy
}

/// `1 - Tr rho^2` of an energy-diagonal state, from its populations.
pub fn linear_entropy(c: &NessCoefficients) -> f64 {
    let p = c.populations();
    let mut s = 0.0;
    for i in 0..4 {
        for j in i + 1..4 {
            s += 2.0 * p[i] * p[j];
        }
    }
    s
}

/// Open interval for the dimensionless work variance `v` that signals
/// entanglement, given `w = <W>/(2g)` and the purity.
pub fn v_bounds(w: f64, gamma: f64) -> Result<(f64, f64)> {
    let disc = 6.0 * gamma - 2.0;
    if disc < 0.0 {
        return Err(Error::PurityTooLow(gamma));
    }
    let centre = 2.0 - 3.0 * w * w;
    let r = disc.sqrt();
    Ok(((centre - r) / 3.0, (centre + r) / 3.0))
}

/// Dimensionless swap-quench work statistics of a steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwapWorkScales {
    /// `<W^2> / (4g^2)`.
    pub xi: f64,
    /// `<W> / (2g)`.
    pub w: f64,
    /// `Var(W) / (4g^2)`.
    pub v: f64,
}

pub fn swap_work_scales(p: &SystemParams, state: &DensityMatrix) -> Result<SwapWorkScales> {
    let u = workstats::unitary_swap_entangled(p);
    let m = workstats::work_moments(&workstats::tpm_distribution(p, state, &u)?);
    let g = p.g();
    Ok(SwapWorkScales {
        xi: m.second / (4.0 * g * g),
        w: m.mean / (2.0 * g),
        v: m.variance / (4.0 * g * g),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntanglementReport {
    pub concurrence: f64,
    pub mutual_information: f64,
    pub purity: f64,
    /// `1 - purity`, computed without cancellation.
    pub linear_entropy: f64,
    pub criterion_populations: bool,
    pub criterion_thermo: bool,
    pub xi: f64,
    pub w: f64,
    pub v: f64,
    /// Absent when the purity is below 1/3.
    pub v_bounds: Option<(f64, f64)>,
    pub v_within_bounds: bool,
}

pub fn entanglement_report(p: &SystemParams) -> Result<EntanglementReport> {
    let c = model::ness_analytic(p);
    let rho = c.density_matrix();
    let purity = qmat::purity(&rho);
    let scales = swap_work_scales(p, &rho)?;
    let v_bounds = v_bounds(scales.w, purity).ok();
    Ok(EntanglementReport {
        concurrence: concurrence(&rho)?,
        mutual_information: mutual_information(&rho)?,
        purity,
        linear_entropy: linear_entropy(&c),
        criterion_populations: criterion_populations(&c),
        criterion_thermo: criterion_thermo_mixedness(scales.xi, linear_entropy(&c)),
        xi: scales.xi,
        w: scales.w,
        v: scales.v,
        v_bounds,
        v_within_bounds: v_bounds.is_some_and(|(lo, hi)| lo < scales.v && scales.v < hi),
    })
}

/// Euclidean projection onto the probability simplex.
pub fn project_onto_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumulative += uk;
        let candidate = (1.0 - cumulative) / (k + 1) as f64;
        if uk + candidate > 0.0 {
            shift = candidate;
        }
    }
    v.iter().map(|&x| (x + shift).max(0.0)).collect()
}

/// Largest violation of the optimality conditions for `x` being the simplex
/// projection of `v`: `x >= 0`, `sum x = 1`, and `v - x` equal to a common
/// multiplier on the support and not exceeding it elsewhere.
pub fn simplex_kkt_residual(v: &[f64], x: &[f64]) -> f64 {
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0).collect();
    if support.is_empty() {
        return f64::INFINITY;
    }
    let tau = support.iter().map(|&i| v[i] - x[i]).sum::<f64>() / support.len() as f64;
    let mut r = (x.iter().sum::<f64>() - 1.0).abs();
    for i in 0..x.len() {
        r = r.max((-x[i]).max(0.0));
        if x[i] > 0.0 {
            r = r.max((v[i] - x[i] - tau).abs());
        } else {
            r = r.max((v[i] - tau).max(0.0));
        }
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparableProjection {
    pub projected_state: DensityMatrix,
    /// Frobenius distance to the input.
    pub distance: f64,
    /// Whether the relaxed solution turned out PPT. When false the distance
    /// is only a lower bound.
    pub relaxation_tight: bool,
    pub input_was_ppt: bool,
    /// Smallest eigenvalue of the candidate's partial transpose.
    pub min_pt_eigenvalue: f64,
}

/// Closest PPT (equivalently separable) two-qubit state in Frobenius norm,
/// via the relaxation that drops positivity of the partial transpose.
pub fn closest_separable(rho: &DensityMatrix) -> Result<SeparableProjection> {
    if rho.dim() != 4 {
        return Err(Error::Dimension { expected: 4, got: rho.dim() });
    }
    let a = qmat::hermitize(&qmat::partial_transpose(rho.matrix())?);
    let eig = qmat::hermitian_eig(&a)?;
    if eig.eigenvalues[0] >= -PPT_TOL {
        return Ok(SeparableProjection {
            projected_state: rho.clone(),
            distance: 0.0,
            relaxation_tight: true,
            input_was_ppt: true,
            min_pt_eigenvalue: min_partial_transpose_eigenvalue(rho.matrix())?,
        });
    }

    let projected = project_onto_simplex(&eig.eigenvalues);
    let sigma = qmat::HermitianEig { eigenvalues: projected, eigenvectors: eig.eigenvectors }
        .reconstruct();
    let candidate = qmat::hermitize(&qmat::partial_transpose(&sigma)?);
    let min_eig = qmat::hermitian_eigenvalues(&candidate)?[0];
    let relaxation_tight = min_eig >= -PPT_TOL;
    let distance = qmat::frobenius_distance(rho.matrix(), &candidate)?;
    let projected_state = if relaxation_tight {
        DensityMatrix::new(candidate)?
    } else {
        // Not a state; keep it for diagnostics without validation.
        DensityMatrix::from_hermitized(&candidate).unwrap_or_else(|_| rho.clone())
    };
    Ok(SeparableProjection {
        projected_state,
        distance,
        relaxation_tight,
        input_was_ppt: false,
        min_pt_eigenvalue: min_partial_transpose_eigenvalue(&sigma)?,
    })
}

/// Frobenius norm of the energy-basis off-diagonal part.
pub fn energy_coherence(state: &DensityMatrix) -> f64 {
    let mut e = model::to_energy_basis(state.matrix());
    for i in 0..4 {
        e[(i, i)] = c64(0.0, 0.0);
    }
    e.norm()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparableWorkComparison {
    pub distance: f64,
    pub relaxation_tight: bool,
    pub input_was_ppt: bool,
    /// Energy coherence of the projected state; the work distribution only
    /// reads its energy populations.
    pub projected_coherence: f64,
    pub ness: WorkMoments,
    pub separable: WorkMoments,
    /// `rel_err_sq(separable) / rel_err_sq(ness)`.
    pub rel_err_ratio: Option<f64>,
}

pub fn separable_work_comparison(
    p: &SystemParams,
    u: &ComplexMatrix,
) -> Result<SeparableWorkComparison> {
    let ness = model::ness_analytic(p).density_matrix();
    let proj = closest_separable(&ness)?;
    let moments = |s: &DensityMatrix| -> Result<WorkMoments> {
        Ok(workstats::work_moments(&workstats::tpm_distribution(p, s, u)?))
    };
    let m_ness = moments(&ness)?;
    let m_sep = moments(&proj.projected_state)?;
    let rel_err_ratio = match (m_ness.rel_err_sq, m_sep.rel_err_sq) {
        (Some(a), Some(b)) if a > 0.0 => Some(b / a),
        _ => None,
    };
    Ok(SeparableWorkComparison {
        distance: proj.distance,
        relaxation_tight: proj.relaxation_tight,
        input_was_ppt: proj.input_was_ppt,
        projected_coherence: energy_coherence(&proj.projected_state),
        ness: m_ness,
        separable: m_sep,
        rel_err_ratio,
    })
}
