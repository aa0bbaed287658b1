//! Lawson–Hanson active-set nonnegative least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    /// `‖A x - b‖₂`.
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Solve `min ‖A x - b‖₂` subject to `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<NnlsSolution> {
    let (m, n) = a.shape();
    check_dim(m, b.len())?;
    if n == 0 {
        return Err(Error::InvalidArgument("NNLS with no columns".into()));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("NNLS input is not finite".into()));
    }
    let at = a.transpose();
    let scale = (&at * b).amax().max(a.amax() * b.amax()).max(f64::MIN_POSITIVE);
    let tol = 10.0 * f64::EPSILON * (m.max(n) as f64) * scale;

    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let max_outer = 3 * n + 10;
    let mut iterations = 0;

    for _ in 0..max_outer {
        let w = &at * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;

        loop {
            iterations += 1;
            let s = solve_passive(a, b, &passive);
            let all_positive = (0..n).filter(|&i| passive[i]).all(|i| s[i] > 0.0);
            if all_positive {
                x = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            for i in (0..n).filter(|&i| passive[i] && s[i] <= 0.0) {
                let denom = x[i] - s[i];
                if denom > 0.0 {
                    alpha = alpha.min(x[i] / denom);
                } else {
                    alpha = 0.0;
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            x += (&s - &x) * alpha;
            let drop_tol = 1e-14 * x.amax();
            for i in 0..n {
                if passive[i] && x[i] <= drop_tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            // guard against cycling when the entering column is immediately dropped
            if !passive.iter().any(|&p| p) || iterations > 50 * (n + 1) {
                break;
            }
        }
        if iterations > 50 * (n + 1) {
            break;
        }
    }
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let residual_norm = (a * &x - b).norm();
    Ok(NnlsSolution {
        x,
        residual_norm,
        iterations,
    })
}

/// Unconstrained least squares over the passive columns; zero elsewhere.
fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let sub = a.select_columns(&idx);
    let svd = sub.svd(true, true);
    let sol = svd
        .solve(b, f64::EPSILON * a.nrows().max(idx.len()) as f64 * svd.singular_values.max())
        .expect("SVD computed with both factors");
    let mut full = DVector::zeros(passive.len());
    for (k, &i) in idx.iter().enumerate() {
        full[i] = sol[k];
    }
    full
}
