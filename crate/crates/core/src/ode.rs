//! Adaptive Dormand–Prince 5(4) stepper for real state vectors.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest step accepted before reporting underflow.
    pub h_min: f64,
    pub h_max: f64,
    pub h_init: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-9, atol: 1e-12, h_min: 1e-14, h_max: f64::INFINITY, h_init: None }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th- and embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

/// Stateful integrator for `y' = f(t, y)`. Each call to [`Stepper::advance`]
/// performs exactly one accepted step.
pub struct Stepper<F> {
    f: F,
    t: f64,
    y: Vec<f64>,
    k1: Vec<f64>,
    h: f64,
    opts: OdeOptions,
    work: [Vec<f64>; 7],
    pub accepted: usize,
    pub rejected: usize,
}

impl<F> Stepper<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    pub fn new(mut f: F, t0: f64, y0: Vec<f64>, opts: OdeOptions) -> Self {
        let n = y0.len();
        let mut k1 = vec![0.0; n];
        f(t0, &y0, &mut k1);
        let mut s = Self {
            f,
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            opts,
            work: std::array::from_fn(|_| vec![0.0; n]),
            accepted: 0,
            rejected: 0,
        };
        s.h = opts.h_init.unwrap_or_else(|| s.initial_step());
        s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Derivative at the current point.
    pub fn dy(&self) -> &[f64] {
        &self.k1
    }

    /// Replaces the current state (e.g. after a projection) and refreshes the
    /// cached derivative.
    pub fn set_state(&mut self, y: Vec<f64>) {
        assert_eq!(y.len(), self.y.len());
        self.y = y;
        (self.f)(self.t, &self.y, &mut self.k1);
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.opts.atol + self.opts.rtol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self) -> f64 {
        // Hairer, Norsett & Wanner, starting step heuristic.
        let n = self.y.len() as f64;
        let d0 = (self.y.iter().map(|&y| (y / self.scale(y, y)).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (self
            .y
            .iter()
            .zip(&self.k1)
            .map(|(&y, &k)| (k / self.scale(y, y)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let y1: Vec<f64> = self.y.iter().zip(&self.k1).map(|(y, k)| y + h0 * k).collect();
        let mut f1 = vec![0.0; self.y.len()];
        (self.f)(self.t + h0, &y1, &mut f1);
        let d2 = (self
            .y
            .iter()
            .zip(f1.iter().zip(&self.k1))
            .map(|(&y, (&a, &b))| ((a - b) / self.scale(y, y)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.opts.h_max)
    }

    /// Takes one accepted step, never going past `t_limit`.
    pub fn advance(&mut self, t_limit: f64) -> Result<()> {
        let n = self.y.len();
        loop {
            let remaining = t_limit - self.t;
            if remaining <= 0.0 {
                return Ok(());
            }
            let mut h = self.h.min(self.opts.h_max);
            let mut hits_limit = false;
            if h >= remaining {
                h = remaining;
                hits_limit = true;
            } else if h > 0.5 * remaining && h < remaining {
                // Avoid leaving a sliver before the limit.
                h = 0.5 * remaining;
            }
            if h < self.opts.h_min && !hits_limit {
                return Err(Error::StepUnderflow { t: self.t });
            }

            let t = self.t;
            let [k2, k3, k4, k5, k6, k7, ytmp] = &mut self.work;
            let y = &self.y;
            let k1 = &self.k1;
            let f = &mut self.f;

            for i in 0..n {
                ytmp[i] = y[i] + h * A21 * k1[i];
            }
            f(t + C2 * h, ytmp, k2);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            f(t + C3 * h, ytmp, k3);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(t + C4 * h, ytmp, k4);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(t + C5 * h, ytmp, k5);
            for i in 0..n {
                ytmp[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            f(t + h, ytmp, k6);
            for i in 0..n {
                ytmp[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            f(t + h, ytmp, k7);

            let mut err_sq = 0.0;
            for i in 0..n {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(ytmp[i].abs());
                err_sq += (e / sc).powi(2);
            }
            let err = (err_sq / n as f64).sqrt();

            if !err.is_finite() {
                self.h = 0.1 * h;
                self.rejected += 1;
                continue;
            }

            let fac = if err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };

            if err <= 1.0 {
                self.t = if hits_limit { t_limit } else { t + h };
                std::mem::swap(&mut self.y, ytmp);
                std::mem::swap(&mut self.k1, k7);
                self.accepted += 1;
                // Keep the controller's proposal when a step was clipped to a
                // sample time.
                if !hits_limit || h * fac > self.h {
                    self.h = h * fac;
                }
                return Ok(());
            }
            self.rejected += 1;
            self.h = h * fac.min(1.0);
            if self.h < self.opts.h_min {
                return Err(Error::StepUnderflow { t: self.t });
            }
        }
    }

    /// Integrates up to exactly `t_end`.
    #[cfg(test)]
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.t < t_end {
            self.advance(t_end)?;
        }
        Ok(())
    }
}
