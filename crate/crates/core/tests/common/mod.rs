#![allow(dead_code)]

use nesstur_core::model::SystemParams;
use rand::Rng;

/// Valid parameters spanning weak to strong coupling and temperature ratios
/// up to 10.
pub fn random_params<R: Rng>(rng: &mut R) -> SystemParams {
    let omega = rng.random_range(0.5..2.0);
    let g = omega * rng.random_range(0.02..0.98);
    let beta_h = rng.random_range(0.1..3.0);
    let beta_c = beta_h * rng.random_range(1.0..10.0);
    let nu_c = rng.random_range(1e-3..0.05);
    let nu_h = rng.random_range(1e-3..0.05);
    SystemParams::new(omega, g, beta_c, beta_h, nu_c, nu_h).expect("sampled parameters are valid")
}

/// As [`random_params`] but with a strictly hotter hot bath.
pub fn random_params_nonequilibrium<R: Rng>(rng: &mut R) -> SystemParams {
    loop {
        let p = random_params(rng);
        if p.beta_c() > p.beta_h() * (1.0 + 1e-9) {
            return p;
        }
    }
}
