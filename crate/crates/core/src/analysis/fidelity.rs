use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DecodedShot;
use crate::error::{invalid, Error, Result};
use crate::numeric::{invert_dense, levenberg_marquardt, LmOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityPoint {
    pub rounds: usize,
    pub fidelity: f64,
    pub sigma: f64,
    pub shots: u64,
}

impl FidelityPoint {
    /// Point with the binomial standard error `sqrt(F (1 - F) / N)`.
    pub fn new(rounds: usize, fidelity: f64, shots: u64) -> Self {
        Self {
            rounds,
            fidelity,
            sigma: (fidelity * (1.0 - fidelity) / shots as f64).sqrt(),
            shots,
        }
    }
}

/// Logical fidelity per number of rounds, averaged uniformly over the
/// prepared states present at each round count.
pub fn fidelity(shots: &[DecodedShot]) -> Result<Vec<FidelityPoint>> {
    if shots.is_empty() {
        return Err(invalid("cannot compute fidelity of an empty result set"));
    }
    let mut cells: BTreeMap<usize, BTreeMap<&str, (u64, u64)>> = BTreeMap::new();
    for s in shots {
        let c = cells.entry(s.rounds).or_default().entry(&s.initial_state).or_default();
        c.0 += s.success() as u64;
        c.1 += 1;
    }
    Ok(cells
        .into_iter()
        .map(|(rounds, states)| {
            let n: u64 = states.values().map(|c| c.1).sum();
            let f = states.values().map(|&(ok, m)| ok as f64 / m as f64).sum::<f64>() / states.len() as f64;
            FidelityPoint::new(rounds, f, n)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitOptions {
    /// Drop points with fewer rounds than this.
    pub min_rounds: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalFit {
    pub eps_l: f64,
    pub r0: f64,
    /// Covariance of `(eps_l, r0)`.
    pub covariance: [[f64; 2]; 2],
    /// Normalized residuals `(F - model) / sigma` per fitted point.
    pub residuals: Vec<f64>,
    pub chi2: f64,
}

impl LogicalFit {
    pub fn eps_sigma(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn r0_sigma(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }

    /// Model fidelity after `rounds` rounds.
    pub fn model(&self, rounds: f64) -> f64 {
        decay(self.eps_l, self.r0, rounds)
    }
}

fn decay(eps: f64, r0: f64, r: f64) -> f64 {
    0.5 * (1.0 + (1.0 - 2.0 * eps).powf(r - r0))
}

/// Weighted least-squares fit of `F(R) = (1 + (1 - 2 eps)^(R - R0)) / 2`.
///
/// The fit runs in `lambda = ln(1 - 2 eps)`; the covariance is
/// `(J^T W J)^-1` in `(eps, R0)` with weights `1 / sigma^2`. Points with
/// zero reported sigma use `1 / N` instead.
pub fn fit_logical(points: &[FidelityPoint], opts: &FitOptions) -> Result<LogicalFit> {
    let pts: Vec<&FidelityPoint> = points
        .iter()
        .filter(|p| opts.min_rounds.is_none_or(|m| p.rounds >= m))
        .collect();
    if pts.len() < 3 {
        return Err(invalid(format!("need at least 3 points to fit, got {}", pts.len())));
    }
    let sig: Vec<f64> = pts
        .iter()
        .map(|p| if p.sigma > 0.0 { p.sigma } else { 1.0 / (p.shots.max(1) as f64) })
        .collect();
    let r: Vec<f64> = pts.iter().map(|p| p.rounds as f64).collect();
    let f: Vec<f64> = pts.iter().map(|p| p.fidelity).collect();

    let residuals = |x: &[f64]| -> Vec<f64> {
        (0..r.len())
            .map(|i| (f[i] - 0.5 * (1.0 + (x[0] * (r[i] - x[1])).exp())) / sig[i])
            .collect()
    };
    let jacobian = |x: &[f64]| -> Vec<Vec<f64>> {
        (0..r.len())
            .map(|i| {
                let g = 0.5 * (x[0] * (r[i] - x[1])).exp();
                vec![-g * (r[i] - x[1]) / sig[i], g * x[0] / sig[i]]
            })
            .collect()
    };

    // Start from a log-linear fit of ln(2F - 1) against R.
    let usable: Vec<(f64, f64)> = r
        .iter()
        .zip(&f)
        .filter(|(_, &fi)| fi > 0.5 && fi < 1.0)
        .map(|(&ri, &fi)| (ri, (2.0 * fi - 1.0).ln()))
        .collect();
    let mut start = [-0.01, 0.0];
    if usable.len() >= 2 {
        let n = usable.len() as f64;
        let mx = usable.iter().map(|u| u.0).sum::<f64>() / n;
        let my = usable.iter().map(|u| u.1).sum::<f64>() / n;
        let sxy: f64 = usable.iter().map(|u| (u.0 - mx) * (u.1 - my)).sum();
        let sxx: f64 = usable.iter().map(|u| (u.0 - mx).powi(2)).sum();
        if sxx > 0.0 && sxy < 0.0 {
            // ln(2F - 1) = lambda (R - R0)
            let slope = sxy / sxx;
            start = [slope, mx - my / slope];
        }
    }
    let opts = LmOptions {
        max_iterations: 1000,
        cost_tolerance: 1e-30,
        step_tolerance: 1e-15,
    };
    let report = levenberg_marquardt(residuals, jacobian, &start, &opts);
    let [lambda, r0] = [report.params[0], report.params[1]];
    if !report.converged || !lambda.is_finite() || !r0.is_finite() {
        return Err(Error::NonConvergence(format!(
            "logical fit did not converge after {} iterations; normalized residuals {:?}",
            report.iterations, report.residuals
        )));
    }
    let eps = ((1.0 - lambda.exp()) / 2.0).clamp(0.0, 0.5);

    // Covariance in (eps, R0).
    let base = 1.0 - 2.0 * eps;
    let mut jtj = [[0.0; 2]; 2];
    for i in 0..r.len() {
        let t = r[i] - r0;
        let d_eps = -t * base.powf(t - 1.0);
        let d_r0 = -0.5 * base.powf(t) * base.ln();
        let row = [d_eps / sig[i], d_r0 / sig[i]];
        for a in 0..2 {
            for b in 0..2 {
                jtj[a][b] += row[a] * row[b];
            }
        }
    }
    let inv = invert_dense(&[jtj[0].to_vec(), jtj[1].to_vec()])
        .ok_or_else(|| Error::NonConvergence("singular fit Jacobian; the points do not constrain eps and R0".into()))?;
    Ok(LogicalFit {
        eps_l: eps,
        r0,
        covariance: [[inv[0][0], inv[0][1]], [inv[1][0], inv[1][1]]],
        chi2: report.cost,
        residuals: report.residuals,
    })
}
