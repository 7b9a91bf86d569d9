//! Readout model with amplitude damping during the integration window.
//!
//! A qubit prepared in |1> decays at a uniformly random point of the
//! measurement with rate `beta = tau_m / T1`. If it decays a fraction `u` of
//! the way through, the integrated signal is centred at
//! `mu0 + (mu1 - mu0) u`. Marginalizing over `u` gives
//!
//! ```text
//! P(z|0) = N(z; mu0, 1/alpha)
//! P(z|1) = e^{-beta} N(z; mu1, 1/alpha)
//!        + (k/2) exp(k^2/(2 alpha) - k (z - mu0))
//!          * [erf(sqrt(alpha/2)(mu1 - z + k/alpha)) - erf(sqrt(alpha/2)(mu0 - z + k/alpha))]
//! ```
//!
//! with `k = beta / (mu1 - mu0)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fit::{check_samples, check_separated, em_1d, projection_from};
use super::IqSample;
use crate::error::{Error, Result};
use crate::numeric::{erf, log_sum_exp, nelder_mead, normal_ln_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeDampingModel {
    pub mu0: f64,
    pub mu1: f64,
    /// Inverse variance of the integrated signal.
    pub alpha: f64,
    /// Damping strength `tau_m / T1`.
    pub beta: f64,
}

/// `|erf(a) - erf(b)|` evaluated through `erfc` in the tails.
fn erf_gap(a: f64, b: f64) -> f64 {
    use libm::erfc;
    if a >= 0.0 && b >= 0.0 {
        (erfc(b) - erfc(a)).abs()
    } else if a <= 0.0 && b <= 0.0 {
        (erfc(-a) - erfc(-b)).abs()
    } else {
        (erf(a) - erf(b)).abs()
    }
}

impl AmplitudeDampingModel {
    pub fn sigma(&self) -> f64 {
        self.alpha.sqrt().recip()
    }

    fn ln_decay_term(&self, z: f64) -> f64 {
        if self.beta == 0.0 {
            return f64::NEG_INFINITY;
        }
        let k = self.beta / (self.mu1 - self.mu0);
        let s = (self.alpha / 2.0).sqrt();
        let shift = k / self.alpha;
        let gap = erf_gap(s * (self.mu1 - z + shift), s * (self.mu0 - z + shift));
        if gap == 0.0 {
            return f64::NEG_INFINITY;
        }
        (k.abs() / 2.0).ln() + k * k / (2.0 * self.alpha) - k * (z - self.mu0) + gap.ln()
    }

    /// `ln P(z|state)` on the projected axis, `state` in {0, 1}.
    pub fn ln_pdf(&self, z: f64, state: usize) -> f64 {
        let sigma = self.sigma();
        match state {
            0 => normal_ln_pdf(z, self.mu0, sigma),
            1 => log_sum_exp(&[-self.beta + normal_ln_pdf(z, self.mu1, sigma), self.ln_decay_term(z)]),
            _ => panic!("amplitude-damping model has no state {state}"),
        }
    }

    pub fn pdf(&self, z: f64, state: usize) -> f64 {
        self.ln_pdf(z, state).exp()
    }

    /// Draw a projected sample for `state` from the forward decay process.
    pub fn sample<R: Rng + ?Sized>(&self, state: u8, rng: &mut R) -> f64 {
        let noise: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
        let frac = if state == 0 { 0.0 } else { decay_fraction(self.beta, rng) };
        self.mu0 + (self.mu1 - self.mu0) * frac + self.sigma() * noise
    }
}

/// Fraction of the integration window spent in |1> by a qubit that starts
/// there and decays with strength `beta`; 1 when it survives.
pub fn decay_fraction<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    if beta <= 0.0 {
        return 1.0;
    }
    let u: f64 = rng.random::<f64>();
    (-(1.0 - u).ln() / beta).min(1.0)
}

/// Maximum-likelihood fit of the amplitude-damping model to |0> and |1>
/// calibration clouds, using the same projection as the two-state fit.
pub fn fit_amplitude_damping(calib0: &[IqSample], calib1: &[IqSample]) -> Result<AmplitudeDampingModel> {
    check_samples("0", calib0)?;
    check_samples("1", calib1)?;
    check_separated(calib0, calib1, ("0", "1"))?;
    let projection = projection_from(calib0, calib1);
    let x0: Vec<f64> = calib0.iter().map(|&z| projection.project(z)).collect();
    let x1: Vec<f64> = calib1.iter().map(|&z| projection.project(z)).collect();
    let start = em_1d(&x0, &x1)?;

    // beta = b^2 keeps the damping non-negative while letting it reach zero.
    let unpack = |p: &[f64]| AmplitudeDampingModel {
        mu0: p[0],
        mu1: p[1],
        alpha: (-2.0 * p[2]).exp(),
        beta: p[3] * p[3],
    };
    let n = (x0.len() + x1.len()) as f64;
    let nll = |p: &[f64]| {
        let m = unpack(p);
        if m.mu0 == m.mu1 {
            return f64::INFINITY;
        }
        let a: f64 = x0.iter().map(|&z| m.ln_pdf(z, 0)).sum();
        let b: f64 = x1.iter().map(|&z| m.ln_pdf(z, 1)).sum();
        -(a + b) / n
    };
    let sep = (start.mu1 - start.mu0).abs();
    let mut x = vec![start.mu0, start.mu1, start.sigma.ln(), 0.3];
    let mut report = None;
    for _ in 0..4 {
        let scale = [0.05 * sep, 0.05 * sep, 0.1, 0.1];
        let r = nelder_mead(nll, &x, &scale, 20_000, 1e-13);
        x = r.params.clone();
        let done = report
            .as_ref()
            .is_some_and(|prev: &crate::numeric::NelderMeadReport| (prev.value - r.value).abs() < 1e-12);
        report = Some(r);
        if done {
            break;
        }
    }
    let report = report.expect("at least one simplex run");
    if !report.converged || !report.value.is_finite() {
        return Err(Error::NonConvergence(format!(
            "amplitude-damping fit did not converge: mean negative log-likelihood {:.6} after {} iterations at {:?}",
            report.value, report.iterations, report.params
        )));
    }
    Ok(unpack(&report.params))
}
