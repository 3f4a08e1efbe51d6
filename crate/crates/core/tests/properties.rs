use nesstur_core::dynamics;
use nesstur_core::entangle;
use nesstur_core::model::{self, Bath, SystemParams, Transition};
use nesstur_core::qmat::{self, c64, ComplexMatrix, DensityMatrix};
use nesstur_core::tur;
use nesstur_core::workstats;
use proptest::prelude::*;

fn hermitian() -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec(-1.0f64..1.0, 32).prop_map(|v| {
        let a = ComplexMatrix::from_fn(4, 4, |i, j| c64(v[4 * i + j], v[16 + 4 * i + j]));
        (&a + a.adjoint()) * c64(0.5, 0.0)
    })
}

/// Full-rank density matrix `(A A^dagger + eps I) / Tr`.
fn density() -> impl Strategy<Value = DensityMatrix> {
    prop::collection::vec(-1.0f64..1.0, 32).prop_map(|v| {
        let a = ComplexMatrix::from_fn(4, 4, |i, j| c64(v[4 * i + j], v[16 + 4 * i + j]));
        let m = &a * a.adjoint() + qmat::identity(4) * c64(1e-3, 0.0);
        let tr = qmat::trace(&m).re;
        DensityMatrix::from_hermitized(&(m / c64(tr, 0.0))).unwrap()
    })
}

fn params() -> impl Strategy<Value = SystemParams> {
    (0.5f64..2.0, 0.02f64..0.98, 0.1f64..3.0, 1.0f64..10.0, 1e-3f64..0.05, 1e-3f64..0.05).prop_map(
        |(omega, gr, beta_h, ratio, nu_c, nu_h)| {
            SystemParams::new(omega, gr * omega, beta_h * ratio, beta_h, nu_c, nu_h).unwrap()
        },
    )
}

fn power_trace(m: &ComplexMatrix, k: i32) -> f64 {
    let mut acc = qmat::identity(4);
    for _ in 0..k {
        acc = &acc * m;
    }
    qmat::trace(&acc).re
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn eigendecomposition_reconstructs(m in hermitian()) {
        let e = qmat::hermitian_eig(&m).unwrap();
        prop_assert!((e.reconstruct() - &m).norm() < 1e-12 * m.norm().max(1.0));
        let v = &e.eigenvectors;
        prop_assert!((v.adjoint() * v - qmat::identity(4)).norm() < 1e-12);
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigenvalues_satisfy_newton_identities(m in hermitian()) {
        // Power sums fix the characteristic polynomial of a 4x4 matrix.
        let ev = qmat::hermitian_eigenvalues(&m).unwrap();
        for k in 1..=4 {
            let from_eigs: f64 = ev.iter().map(|x| x.powi(k)).sum();
            prop_assert!((from_eigs - power_trace(&m, k)).abs() < 1e-11);
        }
    }

    #[test]
    fn characteristic_polynomial_vanishes_at_eigenvalues(m in hermitian()) {
        // Faddeev-LeVerrier coefficients of det(x I - M).
        let mut coeffs = vec![1.0];
        let mut mk = qmat::identity(4);
        for k in 1..=4 {
            let am = &m * &mk;
            let ck = -qmat::trace(&am).re / k as f64;
            coeffs.push(ck);
            mk = am + qmat::identity(4) * c64(ck, 0.0);
        }
        for lambda in qmat::hermitian_eigenvalues(&m).unwrap() {
            let value = coeffs.iter().fold(0.0, |acc, c| acc * lambda + c);
            prop_assert!(value.abs() < 1e-10, "p({lambda}) = {value}");
        }
    }

    #[test]
    fn entropies_are_unitarily_invariant(rho in density(), sigma in density(), seed in any::<u64>()) {
        let u = workstats::haar_random_unitary(seed, 4);
        let r2 = rho.conjugate_by(&u).unwrap();
        let s2 = sigma.conjugate_by(&u).unwrap();
        prop_assert!((qmat::von_neumann_entropy(&rho) - qmat::von_neumann_entropy(&r2)).abs() < 1e-10);
        let d1 = qmat::quantum_relative_entropy(&rho, &sigma).unwrap();
        let d2 = qmat::quantum_relative_entropy(&r2, &s2).unwrap();
        prop_assert!(d1 >= 0.0);
        prop_assert!((d1 - d2).abs() < 1e-9 * d1.max(1.0));
    }

    #[test]
    fn partial_transpose_is_an_isometric_involution(m in hermitian()) {
        let pt = qmat::partial_transpose(&m).unwrap();
        prop_assert!((qmat::partial_transpose(&pt).unwrap() - &m).norm() < 1e-15);
        prop_assert!((pt.norm() - m.norm()).abs() < 1e-12);
    }

    #[test]
    fn purity_is_the_squared_spectrum(rho in density()) {
        let ev = qmat::hermitian_eigenvalues(rho.matrix()).unwrap();
        let sum_sq: f64 = ev.iter().map(|x| x * x).sum();
        prop_assert!((qmat::purity(&rho) - sum_sq).abs() < 1e-12);
        prop_assert!(qmat::purity(&rho) >= 0.25 - 1e-12);
    }

    #[test]
    fn partial_traces_are_states(rho in density()) {
        for s in [qmat::Subsystem::First, qmat::Subsystem::Second] {
            let r = qmat::partial_trace(&rho, s).unwrap();
            prop_assert_eq!(r.dim(), 2);
            prop_assert!((qmat::trace(r.matrix()).re - 1.0).abs() < 1e-12);
        }
        prop_assert!(entangle::mutual_information(&rho).unwrap() >= 0.0);
        let c = entangle::concurrence(&rho).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn rates_obey_detailed_balance(p in params()) {
        for bath in Bath::ALL {
            for t in Transition::ALL {
                let eps = p.transition_energy(t);
                let r = model::transition_rates(&p, bath, eps).unwrap();
                prop_assert!(r.gamma > 0.0 && r.gamma_bar > r.gamma);
                prop_assert!(((r.gamma_bar / r.gamma).ln() - p.beta(bath) * eps).abs() < 1e-10);
                prop_assert!((r.gamma_bar - r.gamma - p.nu(bath) * eps).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn steady_state_invariants(p in params()) {
        let c = model::ness_analytic(&p);
        prop_assert!((c.populations().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        prop_assert!(model::passivity_check(&c));
        let rho = c.density_matrix();
        prop_assert!(dynamics::gksl_rhs(&p, &rho).norm() < 1e-12);
        let jh = dynamics::heat_current(&p, &rho, Bath::Hot);
        let jc = dynamics::heat_current(&p, &rho, Bath::Cold);
        prop_assert!(jh >= -1e-15);
        prop_assert!((jh + jc).abs() < 1e-14);
        prop_assert!(dynamics::entropy_production_rate(&p, &rho).unwrap() >= -1e-14);
    }

    #[test]
    fn swap_certificate_holds(p in params()) {
        let cert = tur::swap_tur_certificate(&p);
        prop_assert!(!matches!(cert, tur::SwapCertificate::Fails { .. }), "{cert:?}");
    }

    #[test]
    fn work_distribution_is_normalised(p in params(), seed in any::<u64>()) {
        let rho = model::ness_analytic(&p).density_matrix();
        let u = workstats::haar_random_unitary(seed, 4);
        let d = workstats::tpm_distribution(&p, &rho, &u).unwrap();
        prop_assert!((d.total_probability() - 1.0).abs() < 1e-12);
        prop_assert!(d.atoms.windows(2).all(|w| w[0].w < w[1].w));
        let m = workstats::work_moments(&d);
        // The steady state is energy-diagonal, so the TPM mean is the plain
        // energy change.
        let direct = workstats::mean_energy_change(&p, &rho, &u);
        prop_assert!((m.mean - direct).abs() < 1e-12);
        prop_assert!(m.variance >= -1e-14);
        prop_assert!(dynamics::sigma_rel(&p, &u).unwrap() >= 0.0);
    }

    #[test]
    fn simplex_projection_kkt(v in prop::collection::vec(-2.0f64..2.0, 1..9)) {
        let x = entangle::project_onto_simplex(&v);
        prop_assert!(entangle::simplex_kkt_residual(&v, &x) < 1e-10);
    }

    #[test]
    fn f_dominates_f0(x in 1e-6f64..50.0) {
        prop_assert!(tur::bound_f(x).unwrap() >= tur::bound_f0(x).unwrap());
    }

    #[test]
    fn separable_projection_is_a_ppt_state(p in params()) {
        let rho = model::ness_analytic(&p).density_matrix();
        let proj = entangle::closest_separable(&rho).unwrap();
        if proj.relaxation_tight {
            let m = proj.projected_state.matrix();
            prop_assert!(entangle::min_partial_transpose_eigenvalue(m).unwrap() >= -1e-10);
            prop_assert!(qmat::hermitian_eigenvalues(m).unwrap()[0] >= -1e-10);
            prop_assert!((qmat::trace(m).re - 1.0).abs() < 1e-10);
        }
        prop_assert_eq!(proj.input_was_ppt, proj.distance == 0.0);
    }
}
