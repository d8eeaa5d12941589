//! Small-parameter least-squares helpers: a bounded Levenberg-Marquardt
//! minimizer with finite-difference Jacobians and weighted straight-line
//! regression.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative cost decrease below which an accepted step ends the search.
    pub ftol: f64,
    /// Relative step size below which the search ends.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            ftol: 1e-14,
            xtol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LsqFit {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// `sqrt(diag(cost/(n-p) · (JᵀJ)⁻¹))`, NaN when undetermined.
    pub std_errors: Vec<f64>,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

fn jacobian<F>(f: &F, x: &[f64], r0: &[f64], bounds: &[(f64, f64)]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = r0.len();
    let p = x.len();
    let mut jac = DMatrix::zeros(n, p);
    for k in 0..p {
        let h = 1e-7 * x[k].abs().max(1.0);
        let (lo, hi) = bounds[k];
        let mut plus = x.to_vec();
        let mut minus = x.to_vec();
        plus[k] = (x[k] + h).min(hi);
        minus[k] = (x[k] - h).max(lo);
        let span = plus[k] - minus[k];
        if span == 0.0 {
            continue;
        }
        let rp = if plus[k] == x[k] { r0.to_vec() } else { f(&plus) };
        let rm = if minus[k] == x[k] { r0.to_vec() } else { f(&minus) };
        for i in 0..n {
            jac[(i, k)] = (rp[i] - rm[i]) / span;
        }
    }
    jac
}

/// Minimize `Σ rᵢ(x)²` subject to box constraints.
pub fn levenberg_marquardt<F>(
    residuals: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    options: LmOptions,
) -> Result<LsqFit>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let p = x0.len();
    assert_eq!(bounds.len(), p);
    let mut x = x0.to_vec();
    project(&mut x, bounds);
    let mut r = residuals(&x);
    let n = r.len();
    if n < p {
        return Err(Error::InsufficientData(format!(
            "{n} residuals for {p} parameters"
        )));
    }
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return Err(Error::FitFailed(format!("non-finite cost at start {x0:?}")));
    }
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let jac = jacobian(&residuals, &x, &r, bounds);
        let jtj = jac.tr_mul(&jac);
        let grad = jac.tr_mul(&DVector::from_column_slice(&r));
        if grad.amax() <= 1e-15 * cost.max(1e-300).sqrt() || grad.amax() == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e14 {
            let mut a = jtj.clone();
            for k in 0..p {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            project(&mut trial, bounds);
            let r_trial = residuals(&trial);
            let c_trial = sum_sq(&r_trial);
            if c_trial.is_finite() && c_trial < cost {
                let moved = trial
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b).abs() / (b.abs() + options.xtol))
                    .fold(0.0, f64::max);
                let drop = (cost - c_trial) / cost.max(1e-300);
                x = trial;
                r = r_trial;
                cost = c_trial;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if moved < options.xtol || drop < options.ftol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction left at working precision.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::FitFailed(format!(
            "no convergence after {iterations} iterations from {x0:?}"
        )));
    }

    let jac = jacobian(&residuals, &x, &r, bounds);
    let jtj = jac.tr_mul(&jac);
    let dof = n.saturating_sub(p);
    let std_errors = match (jtj.try_inverse(), dof) {
        (Some(inv), dof) if dof > 0 => {
            let s2 = cost / dof as f64;
            (0..p).map(|k| (s2 * inv[(k, k)]).max(0.0).sqrt()).collect()
        }
        _ => vec![f64::NAN; p],
    };
    Ok(LsqFit {
        params: x,
        cost,
        residuals: r,
        iterations,
        std_errors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the weighted residual variance.
    pub slope_se: f64,
    pub intercept_se: f64,
    pub points: usize,
}

/// Weighted least squares `y ≈ slope·x + intercept`. Weights are relative;
/// the residual variance is estimated from the data with `n − 2` degrees of
/// freedom.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    assert!(y.len() == n && w.len() == n);
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} points for a line fit")));
    }
    let sw: f64 = w.iter().sum();
    if !(sw > 0.0) {
        return Err(Error::InsufficientData("zero total weight".into()));
    }
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = x[i] - xm;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * (y[i] - ym);
    }
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("no spread in abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = (0..n)
        .map(|i| w[i] * (y[i] - slope * x[i] - intercept).powi(2))
        .sum();
    let s2 = rss / (n - 2) as f64;
    Ok(LinearFit {
        slope,
        intercept,
        slope_se: (s2 / sxx).sqrt(),
        intercept_se: (s2 * (1.0 / sw + xm * xm / sxx)).sqrt(),
        points: n,
    })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ra = ranks(a);
    let rb = ranks(b);
    pearson(&ra, &rb)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    cov / (va * vb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponential_decay() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * (-1.3 * x).exp()).collect();
        let fit = levenberg_marquardt(
            |p| xs.iter().zip(&ys).map(|(x, y)| p[0] * (-p[1] * x).exp() - y).collect(),
            &[1.0, 0.5],
            &[(0.0, 10.0), (0.0, 10.0)],
            LmOptions::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(fit.params[0], 2.5, epsilon = 1e-8);
        assert_abs_diff_eq!(fit.params[1], 1.3, epsilon = 1e-8);
    }

    #[test]
    fn bounds_hold() {
        let fit = levenberg_marquardt(
            |p| vec![p[0] + 1.0, p[0] + 1.0],
            &[0.5],
            &[(0.0, 1.0)],
            LmOptions::default(),
        )
        .unwrap();
        assert_eq!(fit.params[0], 0.0);
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| -0.7 * v + 0.2).collect();
        let fit = weighted_linear_fit(&x, &y, &[1.0, 0.5, 0.25, 2.0]).unwrap();
        assert_abs_diff_eq!(fit.slope, -0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.intercept, 0.2, epsilon = 1e-14);
        assert!(fit.slope_se < 1e-12);
    }

    #[test]
    fn line_needs_three_points() {
        assert!(weighted_linear_fit(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 1.0]).is_err());
        assert!(weighted_linear_fit(&[1.0; 3], &[0.0, 1.0, 2.0], &[1.0; 3]).is_err());
    }

    #[test]
    fn spearman_basics() {
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 35.0]), 1.0);
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        assert_abs_diff_eq!(ranks(&[5.0, 1.0, 5.0])[0], 2.5);
    }
}
