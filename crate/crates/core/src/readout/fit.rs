//! Maximum-likelihood fitting of readout mixtures from calibration clouds.

use log::warn;

use super::{GaussianMixture1D, GaussianMixture2D, IqSample, Projection, ReadoutModel, UNIFORM_PRIORS};
use crate::error::{Error, Result};
use crate::numeric::{levenberg_marquardt, log_sum_exp, normal2_ln_pdf, normal_ln_pdf, numeric_jacobian, LmOptions};

pub const MIN_CALIBRATION_SAMPLES: usize = 100;

const EM_MAX_ITER: usize = 20_000;
const EM_TOL: f64 = 1e-12;

/// How the one-dimensional two-state mixture is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitBackend {
    /// Expectation-maximization on the projected samples.
    #[default]
    Em,
    /// Least-squares fit of the mixture to Freedman-Diaconis histograms.
    Histogram,
}

pub(super) fn check_samples(label: &str, samples: &[IqSample]) -> Result<()> {
    if samples.len() < MIN_CALIBRATION_SAMPLES {
        return Err(Error::DatasetTooSmall {
            got: samples.len(),
            need: MIN_CALIBRATION_SAMPLES,
        });
    }
    if let Some(pos) = samples.iter().position(|z| !z.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "calibration set {label} has a non-finite sample at index {pos}"
        )));
    }
    Ok(())
}

fn centroid(samples: &[IqSample]) -> [f64; 2] {
    let n = samples.len() as f64;
    let (si, sq) = samples
        .iter()
        .fold((0.0, 0.0), |(a, b), z| (a + z.i_volt, b + z.q_volt));
    [si / n, sq / n]
}

/// Per-component variance of a cloud about its centroid, averaged over I and Q.
fn cloud_variance(samples: &[IqSample], c: [f64; 2]) -> f64 {
    let n = samples.len() as f64;
    samples
        .iter()
        .map(|z| ((z.i_volt - c[0]).powi(2) + (z.q_volt - c[1]).powi(2)) / 2.0)
        .sum::<f64>()
        / n
}

/// Reject centroid pairs that are not resolved by the data: the distance
/// must exceed both a relative epsilon and six standard errors of the
/// centroid difference.
pub(super) fn check_separated(a: &[IqSample], b: &[IqSample], labels: (&str, &str)) -> Result<()> {
    let (ca, cb) = (centroid(a), centroid(b));
    let sigma = ((cloud_variance(a, ca) + cloud_variance(b, cb)) / 2.0).sqrt();
    let dist = ((ca[0] - cb[0]).powi(2) + (ca[1] - cb[1]).powi(2)).sqrt();
    let resolution = 6.0 * sigma * (1.0 / a.len() as f64 + 1.0 / b.len() as f64).sqrt();
    if dist <= (1e-12 * sigma).max(resolution) {
        return Err(Error::InseparableStates(format!(
            "centroids of |{}> and |{}> are {dist:.3e} apart (resolution {resolution:.3e})",
            labels.0, labels.1
        )));
    }
    Ok(())
}

pub(super) fn projection_from(calib0: &[IqSample], calib1: &[IqSample]) -> Projection {
    let (c0, c1) = (centroid(calib0), centroid(calib1));
    let d = [c1[0] - c0[0], c1[1] - c0[1]];
    let norm = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let axis = [d[0] / norm, d[1] / norm];
    Projection {
        axis,
        offset: axis[0] * c0[0] + axis[1] * c0[1],
    }
}

fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
}

/// Joint EM over both projected sets with shared means and width.
pub(super) fn em_1d(x0: &[f64], x1: &[f64]) -> Result<GaussianMixture1D> {
    let (m0, v0) = mean_and_var(x0);
    let (m1, v1) = mean_and_var(x1);
    let mut p = GaussianMixture1D {
        mu0: m0,
        mu1: m1,
        sigma: ((v0 + v1) / 2.0).sqrt(),
        r0: 0.0,
        r1: 1.0,
    };
    // Start the mixing weights from nearest-centroid assignment.
    let mid = (m0 + m1) / 2.0;
    let beyond = |xs: &[f64], one_side: bool| {
        xs.iter().filter(|&&x| ((x - mid) * (m1 - m0) > 0.0) == one_side).count() as f64 / xs.len() as f64
    };
    p.r0 = beyond(x0, true).clamp(1e-3, 0.5);
    p.r1 = (1.0 - beyond(x1, false)).clamp(0.5, 1.0 - 1e-3);
    let n_total = (x0.len() + x1.len()) as f64;
    let mut last_ll = f64::NEG_INFINITY;
    for _ in 0..EM_MAX_ITER {
        let (mut w0, mut w1, mut s0, mut s1) = (0.0, 0.0, 0.0, 0.0);
        let (mut g0_sum, mut g1_sum) = (0.0, 0.0);
        let mut ll = 0.0;
        let mut ss = 0.0;
        let mut resp: Vec<f64> = Vec::with_capacity(x0.len() + x1.len());
        for (set, xs) in [x0, x1].into_iter().enumerate() {
            let r = if set == 0 { p.r0 } else { p.r1 };
            for &x in xs {
                let a = (1.0 - r).ln() + normal_ln_pdf(x, p.mu0, p.sigma);
                let b = r.ln() + normal_ln_pdf(x, p.mu1, p.sigma);
                let tot = log_sum_exp(&[a, b]);
                ll += tot;
                let g = (b - tot).exp();
                resp.push(g);
                w0 += 1.0 - g;
                w1 += g;
                s0 += (1.0 - g) * x;
                s1 += g * x;
                if set == 0 {
                    g0_sum += g;
                } else {
                    g1_sum += g;
                }
            }
        }
        let mu0 = if w0 > 0.0 { s0 / w0 } else { p.mu0 };
        let mu1 = if w1 > 0.0 { s1 / w1 } else { p.mu1 };
        for (x, g) in x0.iter().chain(x1).zip(&resp) {
            ss += (1.0 - g) * (x - mu0).powi(2) + g * (x - mu1).powi(2);
        }
        p.mu0 = mu0;
        p.mu1 = mu1;
        p.sigma = (ss / n_total).sqrt();
        p.r0 = g0_sum / x0.len() as f64;
        p.r1 = g1_sum / x1.len() as f64;
        if !(p.sigma > 0.0) {
            return Err(Error::NonConvergence("two-state EM collapsed to zero width".into()));
        }
        if (ll - last_ll).abs() <= EM_TOL * ll.abs().max(1.0) {
            return Ok(p);
        }
        last_ll = ll;
    }
    warn!("two-state EM hit the iteration limit; returning the last iterate");
    Ok(p)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Bin centres and densities (counts / (n * width)) with Freedman-Diaconis bins.
fn fd_histogram(xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let n = xs.len() as f64;
    let width = (2.0 * iqr / n.cbrt()).max((hi - lo) / 1000.0).max(f64::MIN_POSITIVE);
    let bins = (((hi - lo) / width).ceil() as usize).max(1);
    let mut counts = vec![0usize; bins];
    for &x in &sorted {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let centres = (0..bins).map(|b| lo + (b as f64 + 0.5) * width).collect();
    let dens = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    (centres, dens)
}

fn histogram_fit(x0: &[f64], x1: &[f64]) -> Result<GaussianMixture1D> {
    let start = em_1d(x0, x1).unwrap_or_else(|_| {
        let (m0, v0) = mean_and_var(x0);
        let (m1, v1) = mean_and_var(x1);
        GaussianMixture1D {
            mu0: m0,
            mu1: m1,
            sigma: ((v0 + v1) / 2.0).sqrt(),
            r0: 0.01,
            r1: 0.99,
        }
    });
    let h0 = fd_histogram(x0);
    let h1 = fd_histogram(x1);
    let residuals = |p: &[f64]| -> Vec<f64> {
        let m = GaussianMixture1D {
            mu0: p[0],
            mu1: p[1],
            sigma: p[2].abs(),
            r0: p[3],
            r1: p[4],
        };
        let dens = |x: f64, r: f64| {
            (1.0 - r) * normal_ln_pdf(x, m.mu0, m.sigma).exp() + r * normal_ln_pdf(x, m.mu1, m.sigma).exp()
        };
        let mut out = Vec::with_capacity(h0.0.len() + h1.0.len());
        out.extend(h0.0.iter().zip(&h0.1).map(|(&x, &d)| dens(x, m.r0) - d));
        out.extend(h1.0.iter().zip(&h1.1).map(|(&x, &d)| dens(x, m.r1) - d));
        out
    };
    let x_start = [start.mu0, start.mu1, start.sigma, start.r0, start.r1];
    let report = levenberg_marquardt(residuals, |p| numeric_jacobian(residuals, p), &x_start, &LmOptions::default());
    if !report.converged || report.params.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonConvergence(format!(
            "histogram fit stopped after {} iterations with cost {:.3e}",
            report.iterations, report.cost
        )));
    }
    let p = &report.params;
    Ok(GaussianMixture1D {
        mu0: p[0],
        mu1: p[1],
        sigma: p[2].abs(),
        r0: p[3].clamp(0.0, 1.0),
        r1: p[4].clamp(0.0, 1.0),
    })
}

/// Fit the projection axis and two-state mixture by expectation-maximization.
pub fn fit_two_state(qubit_id: &str, calib0: &[IqSample], calib1: &[IqSample]) -> Result<ReadoutModel> {
    fit_two_state_with(qubit_id, calib0, calib1, FitBackend::Em)
}

pub fn fit_two_state_with(
    qubit_id: &str,
    calib0: &[IqSample],
    calib1: &[IqSample],
    backend: FitBackend,
) -> Result<ReadoutModel> {
    check_samples("0", calib0)?;
    check_samples("1", calib1)?;
    check_separated(calib0, calib1, ("0", "1"))?;
    let projection = projection_from(calib0, calib1);
    let x0: Vec<f64> = calib0.iter().map(|&z| projection.project(z)).collect();
    let x1: Vec<f64> = calib1.iter().map(|&z| projection.project(z)).collect();
    let mix1d = match backend {
        FitBackend::Em => em_1d(&x0, &x1)?,
        FitBackend::Histogram => histogram_fit(&x0, &x1)?,
    };
    if mix1d.mu0 == mix1d.mu1 {
        return Err(Error::InseparableStates("fitted means coincide".into()));
    }
    Ok(ReadoutModel {
        qubit_id: qubit_id.to_string(),
        projection,
        mix1d,
        mix2d: None,
        amp_damp: None,
        priors: UNIFORM_PRIORS,
    })
}

/// Joint EM of the three-state mixture: shared means and width, one
/// amplitude row per prepared state.
fn em_2d(sets: [&[IqSample]; 3]) -> Result<GaussianMixture2D> {
    let mut mu = [centroid(sets[0]), centroid(sets[1]), centroid(sets[2])];
    let pooled: f64 = sets.iter().zip(&mu).map(|(s, &c)| cloud_variance(s, c)).sum::<f64>() / 3.0;
    let mut sigma = pooled.sqrt();
    let mut amps = [[0.0; 3]; 3];
    for (j, set) in sets.iter().enumerate() {
        for z in set.iter() {
            let nearest = (0..3)
                .min_by(|&a, &b| {
                    let da = (z.i_volt - mu[a][0]).powi(2) + (z.q_volt - mu[a][1]).powi(2);
                    let db = (z.i_volt - mu[b][0]).powi(2) + (z.q_volt - mu[b][1]).powi(2);
                    da.total_cmp(&db)
                })
                .unwrap();
            amps[j][nearest] += 1.0;
        }
        let n = set.len() as f64;
        for a in amps[j].iter_mut() {
            *a = (*a / n).max(1e-3);
        }
        let s: f64 = amps[j].iter().sum();
        amps[j].iter_mut().for_each(|a| *a /= s);
    }
    let n_total: f64 = sets.iter().map(|s| s.len() as f64).sum();
    let mut last_ll = f64::NEG_INFINITY;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut w = [0.0; 3];
        let mut sx = [[0.0; 2]; 3];
        let mut new_amps = [[0.0; 3]; 3];
        let mut ll = 0.0;
        let mut resp_all: Vec<[f64; 3]> = Vec::with_capacity(n_total as usize);
        for (j, set) in sets.iter().enumerate() {
            for z in set.iter() {
                let l: Vec<f64> = (0..3)
                    .map(|k| {
                        if amps[j][k] > 0.0 {
                            amps[j][k].ln() + normal2_ln_pdf(z.as_array(), mu[k], sigma)
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect();
                let tot = log_sum_exp(&l);
                ll += tot;
                let mut g = [0.0; 3];
                for k in 0..3 {
                    g[k] = (l[k] - tot).exp();
                    w[k] += g[k];
                    sx[k][0] += g[k] * z.i_volt;
                    sx[k][1] += g[k] * z.q_volt;
                    new_amps[j][k] += g[k];
                }
                resp_all.push(g);
            }
        }
        for k in 0..3 {
            if w[k] > 0.0 {
                mu[k] = [sx[k][0] / w[k], sx[k][1] / w[k]];
            }
        }
        let mut ss = 0.0;
        for (z, g) in sets.iter().flat_map(|s| s.iter()).zip(&resp_all) {
            for k in 0..3 {
                ss += g[k] * ((z.i_volt - mu[k][0]).powi(2) + (z.q_volt - mu[k][1]).powi(2));
            }
        }
        sigma = (ss / (2.0 * n_total)).sqrt();
        for (j, set) in sets.iter().enumerate() {
            let n = set.len() as f64;
            for k in 0..3 {
                amps[j][k] = new_amps[j][k] / n;
            }
            let s: f64 = amps[j].iter().sum();
            amps[j].iter_mut().for_each(|a| *a /= s);
        }
        if !(sigma > 0.0) {
            return Err(Error::NonConvergence("three-state EM collapsed to zero width".into()));
        }
        if (ll - last_ll).abs() <= EM_TOL * ll.abs().max(1.0) {
            break;
        }
        if iterations >= EM_MAX_ITER {
            warn!("three-state EM hit the iteration limit; returning the last iterate");
            break;
        }
        last_ll = ll;
    }
    Ok(GaussianMixture2D { mu, sigma, amps })
}

/// Fit the full readout model from |0>, |1> and |2> calibration clouds.
///
/// The two-state projection and mixture come from the |0> and |1> sets; the
/// three-state mixture is fitted independently from all three.
pub fn fit_three_state(
    qubit_id: &str,
    calib0: &[IqSample],
    calib1: &[IqSample],
    calib2: &[IqSample],
) -> Result<ReadoutModel> {
    check_samples("2", calib2)?;
    check_separated(calib0, calib2, ("0", "2"))?;
    check_separated(calib1, calib2, ("1", "2"))?;
    let mut model = fit_two_state(qubit_id, calib0, calib1)?;
    model.mix2d = Some(em_2d([calib0, calib1, calib2])?);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_histogram_density_integrates_to_one() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let (c, d) = fd_histogram(&xs);
        let width = c[1] - c[0];
        let total: f64 = d.iter().sum::<f64>() * width;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples_is_rejected() {
        let few = vec![IqSample::new(0.0, 0.0); 10];
        let many = vec![IqSample::new(1.0, 0.0); 200];
        assert!(matches!(
            fit_two_state("Z1", &few, &many),
            Err(Error::DatasetTooSmall { got: 10, .. })
        ));
    }
}
