//! Small numerical kernels: log-space helpers, dense linear solves,
//! Levenberg-Marquardt, Nelder-Mead and adaptive quadrature.

use std::f64::consts::PI;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `log(sum(exp(xs)))` without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log density of a 1D normal distribution.
pub fn normal_ln_pdf(x: f64, mean: f64, sigma: f64) -> f64 {
    let u = (x - mean) / sigma;
    -0.5 * u * u - sigma.ln() - LN_SQRT_2PI
}

/// Log density of an isotropic 2D normal distribution with covariance sigma^2 I.
pub fn normal2_ln_pdf(x: [f64; 2], mean: [f64; 2], sigma: f64) -> f64 {
    let dx = x[0] - mean[0];
    let dy = x[1] - mean[1];
    -0.5 * (dx * dx + dy * dy) / (sigma * sigma) - 2.0 * sigma.ln() - (2.0 * PI).ln()
}

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `log((1 - p) / p)`, the matching weight of an edge with flip probability `p`.
pub fn log_odds_weight(p: f64) -> f64 {
    ((1.0 - p) / p).ln()
}

/// Solve `a x = b` for a small dense system by Gaussian elimination with
/// partial pivoting. Returns `None` when the matrix is singular.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor != 0.0 {
                for k in col..=n {
                    m[row][k] -= factor * m[col][k];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = m[row][n];
        for k in row + 1..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Inverse of a small dense matrix.
pub fn invert_dense(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cols.push(solve_dense(a, &e)?);
    }
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect())
}

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop once the relative decrease of the cost falls below this.
    pub cost_tolerance: f64,
    /// Stop once the relative step length falls below this.
    pub step_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            cost_tolerance: 1e-15,
            step_tolerance: 1e-14,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub residuals: Vec<f64>,
    /// `J^T J` at `params`, the Gauss-Newton approximation of the Hessian.
    pub jtj: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

fn jtj_and_grad(jac: &[Vec<f64>], r: &[f64], n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut jtj = vec![vec![0.0; n]; n];
    let mut g = vec![0.0; n];
    for (row, &ri) in jac.iter().zip(r) {
        for a in 0..n {
            g[a] += row[a] * ri;
            for b in 0..n {
                jtj[a][b] += row[a] * row[b];
            }
        }
    }
    (jtj, g)
}

/// Levenberg-Marquardt minimisation of `sum(residuals(x)^2)`.
///
/// `jacobian(x)` returns one row per residual.
pub fn levenberg_marquardt<R, J>(
    residuals: R,
    jacobian: J,
    x0: &[f64],
    opts: &LmOptions,
) -> LmReport
where
    R: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> Vec<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = residuals(&x);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let jac = jacobian(&x);
        let (jtj, g) = jtj_and_grad(&jac, &r, n);
        if g.iter().all(|v| v.abs() < 1e-300) {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(1e-12);
            }
            let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            let Some(step) = solve_dense(&a, &rhs) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            let r_trial = residuals(&trial);
            let cost_trial: f64 = r_trial.iter().map(|v| v * v).sum();
            if cost_trial.is_finite() && cost_trial <= cost {
                let step_norm = step.iter().map(|v| v * v).sum::<f64>().sqrt();
                let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let rel_decrease = (cost - cost_trial) / cost.max(1e-300);
                x = trial;
                r = r_trial;
                cost = cost_trial;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel_decrease < opts.cost_tolerance
                    || step_norm <= opts.step_tolerance * (x_norm + opts.step_tolerance)
                    || cost == 0.0
                {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: we are at a (numerical) minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }
    let jac = jacobian(&x);
    let (jtj, _) = jtj_and_grad(&jac, &r, n);
    LmReport {
        params: x,
        cost,
        residuals: r,
        jtj,
        iterations,
        converged,
    }
}

/// Central-difference Jacobian of a residual function, one row per residual.
pub fn numeric_jacobian<R: Fn(&[f64]) -> Vec<f64>>(residuals: R, x: &[f64]) -> Vec<Vec<f64>> {
    let mut cols = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let h = 1e-6 * x[k].abs().max(1e-3);
        let mut up = x.to_vec();
        let mut down = x.to_vec();
        up[k] += h;
        down[k] -= h;
        let (ru, rd) = (residuals(&up), residuals(&down));
        cols.push(ru.iter().zip(&rd).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>());
    }
    let m = cols.first().map_or(0, Vec::len);
    (0..m).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

#[derive(Debug, Clone)]
pub struct NelderMeadReport {
    pub params: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder-Mead simplex minimisation of `f` starting from `x0`, with initial
/// simplex edge lengths `scale`.
pub fn nelder_mead<F>(f: F, x0: &[f64], scale: &[f64], max_iter: usize, tol: f64) -> NelderMeadReport
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += scale[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let spread = (values[n] - values[0]).abs();
        if spread <= tol * (values[0].abs() + tol) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|k| centroid[k] + t * (simplex[n][k] - centroid[k]))
                .collect()
        };
        let reflected = along(-1.0);
        let fr = eval(&reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let (contracted, fc) = if fr < values[n] {
                let c = along(-0.5);
                let fc = eval(&c);
                (c, fc)
            } else {
                let c = along(0.5);
                let fc = eval(&c);
                (c, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    for k in 0..n {
                        simplex[i][k] = simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]);
                    }
                    values[i] = eval(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    NelderMeadReport {
        params: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
    }
}

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(&f, a, fa, b, fb);
    recurse(&f, a, fa, b, fb, m, fm, whole, tol, 50)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn dense_solve_matches_known_system() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve_dense(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        assert!(solve_dense(&[vec![1.0, 2.0], vec![2.0, 4.0]], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn lm_fits_a_line_exactly() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let rep = levenberg_marquardt(
            |p| xs.iter().zip(&ys).map(|(x, y)| p[0] * x + p[1] - y).collect(),
            |_| xs.iter().map(|x| vec![*x, 1.0]).collect(),
            &[0.0, 0.0],
            &LmOptions::default(),
        );
        assert!((rep.params[0] - 2.0).abs() < 1e-10);
        assert!((rep.params[1] + 1.0).abs() < 1e-10);
    }

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let rep = nelder_mead(
            |p| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2),
            &[-1.2, 1.0],
            &[0.5, 0.5],
            5000,
            1e-14,
        );
        assert!((rep.params[0] - 1.0).abs() < 1e-4, "{:?}", rep.params);
    }

    #[test]
    fn quadrature_of_gaussian() {
        let v = integrate(|x| normal_ln_pdf(x, 0.3, 0.7).exp(), -15.0, 15.0, 1e-12);
        assert!((v - 1.0).abs() < 1e-9);
        let phi = std_normal_cdf(-1.0);
        assert!((phi - 0.158_655_253_931_457_07).abs() < 1e-13, "{phi}");
    }
}
