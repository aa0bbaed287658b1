use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{MixtureModel, UnnormalizedTarget};
use crate::error::{check_dim, Error, Result};
use crate::rng::seeded;

use super::VariationalParams;

/// Value of `log q - log φ` assigned to samples outside the support of `φ`.
pub const OUT_OF_SUPPORT_PENALTY: f64 = 1e6;

/// Samples are reduced in fixed-size chunks so sums do not depend on the
/// thread count.
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElboEstimate {
    /// Estimate of `E_q[log q - log φ]`.
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub support_violations: usize,
}

/// Gradient estimate in the flat layout of [`VariationalParams::to_flat`].
#[derive(Debug, Clone)]
pub struct GradientEstimate {
    pub gradient: DVector<f64>,
    /// Per-coordinate standard error of the sample mean.
    pub std_error: DVector<f64>,
    pub n_samples: usize,
    pub support_violations: usize,
}

impl GradientEstimate {
    pub fn as_params(&self, like: &VariationalParams) -> Result<VariationalParams> {
        VariationalParams::from_flat(like.n_components(), like.dim(), &self.gradient)
    }
}

/// `log q(z) - log φ(z)` with the out-of-support penalty.
fn integrand(q: &MixtureModel, target: &UnnormalizedTarget, z: &[f64]) -> (f64, bool) {
    let lp = target.density().log_density(z);
    if lp.is_finite() || lp == f64::INFINITY {
        (q.log_pdf(z) - lp, false)
    } else {
        (OUT_OF_SUPPORT_PENALTY, true)
    }
}

fn draws(q: &MixtureModel, n: usize, seed: u64) -> Vec<DVector<f64>> {
    q.sample_with(n, &mut seeded(seed, 0))
}

fn check(params: &VariationalParams, target: &UnnormalizedTarget, n: usize) -> Result<MixtureModel> {
    check_dim(target.dim(), params.dim())?;
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one Monte Carlo sample".into()));
    }
    params.to_mixture()
}

/// Monte Carlo negative ELBO from `n` draws of `q`.
pub fn negative_elbo_estimate(
    params: &VariationalParams,
    target: &UnnormalizedTarget,
    n: usize,
    seed: u64,
) -> Result<ElboEstimate> {
    let q = check(params, target, n)?;
    let zs = draws(&q, n, seed);
    let terms: Vec<(f64, bool)> = zs.par_iter().map(|z| integrand(&q, target, z.as_slice())).collect();
    let violations = terms.iter().filter(|t| t.1).count();
    let nf = n as f64;
    let mean = terms.iter().map(|t| t.0).sum::<f64>() / nf;
    let se = if n > 1 {
        (terms.iter().map(|t| (t.0 - mean).powi(2)).sum::<f64>() / (nf - 1.0) / nf).sqrt()
    } else {
        0.0
    };
    Ok(ElboEstimate { value: mean, std_error: se, n_samples: n, support_violations: violations })
}

/// Mean and standard error of per-sample vectors produced by `term`.
fn reduce<F>(n: usize, dim: usize, term: F) -> (DVector<f64>, DVector<f64>)
where
    F: Fn(usize) -> DVector<f64> + Sync,
{
    let partial: Vec<(DVector<f64>, DVector<f64>)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut s = DVector::zeros(dim);
            let mut s2 = DVector::zeros(dim);
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let t = term(i);
                s2 += t.component_mul(&t);
                s += t;
            }
            (s, s2)
        })
        .collect();
    let mut s = DVector::zeros(dim);
    let mut s2 = DVector::zeros(dim);
    for (a, b) in partial {
        s += a;
        s2 += b;
    }
    let nf = n as f64;
    let mean = s / nf;
    let se = if n > 1 {
        (s2 / nf - mean.component_mul(&mean)).map(|v| (v.max(0.0) * nf / (nf - 1.0) / nf).sqrt())
    } else {
        DVector::zeros(dim)
    };
    (mean, se)
}

/// `∇_θ log q_θ(z)` in the flat layout, `q` given by `params`/`q`.
fn score(params: &VariationalParams, q: &MixtureModel, z: &[f64]) -> DVector<f64> {
    let (k, d) = (params.n_components(), params.dim());
    let mut g = DVector::zeros(params.n_params());
    let r = q.responsibilities(z);
    let pi = q.weights();
    for j in 0..k {
        g[j] = r[j] - pi[j];
    }
    for (j, comp) in q.components().iter().enumerate() {
        if r[j] == 0.0 {
            continue;
        }
        let v = comp.whiten(z);
        let a = comp.chol().tr_solve_lower_triangular(&v).expect("positive diagonal");
        let mo = params.mean_offset(j);
        for i in 0..d {
            g[mo + i] = r[j] * a[i];
        }
        let l = comp.chol();
        let mut pos = params.chol_offset(j);
        for row in 0..d {
            for col in 0..=row {
                let mut v_ij = a[row] * v[col];
                if row == col {
                    // log-diagonal chain rule
                    v_ij = (v_ij - 1.0 / l[(row, row)]) * l[(row, row)];
                }
                g[pos] = r[j] * v_ij;
                pos += 1;
            }
        }
    }
    g
}

/// Score-function estimate of `∇_θ E_q[log q - log φ]`.
///
/// With `baseline`, each sample's integrand is centered by the mean of the
/// other `n - 1` integrands.
pub fn score_function_gradient(
    params: &VariationalParams,
    target: &UnnormalizedTarget,
    n: usize,
    seed: u64,
    baseline: bool,
) -> Result<GradientEstimate> {
    let q = check(params, target, n)?;
    if baseline && n < 2 {
        return Err(Error::InvalidArgument("the leave-one-out baseline needs n >= 2".into()));
    }
    let zs = draws(&q, n, seed);
    let f: Vec<(f64, bool)> = zs.par_iter().map(|z| integrand(&q, target, z.as_slice())).collect();
    let violations = f.iter().filter(|t| t.1).count();
    let total: f64 = f.iter().map(|t| t.0).sum();
    let weight = |i: usize| {
        if baseline {
            f[i].0 - (total - f[i].0) / (n - 1) as f64
        } else {
            f[i].0
        }
    };
    let (gradient, std_error) =
        reduce(n, params.n_params(), |i| score(params, &q, zs[i].as_slice()) * weight(i));
    Ok(GradientEstimate { gradient, std_error, n_samples: n, support_violations: violations })
}

/// Pathwise estimate for a single Gaussian, `z = μ + L ε`.
pub fn reparam_gradient_single_gaussian(
    params: &VariationalParams,
    target: &UnnormalizedTarget,
    n: usize,
    seed: u64,
) -> Result<GradientEstimate> {
    if params.n_components() != 1 {
        return Err(Error::Unsupported(
            "the pathwise gradient is only available for a single Gaussian".into(),
        ));
    }
    check(params, target, n)?;
    let d = params.dim();
    let l = params.chol(0);
    let mu = &params.means[0];
    let mut rng = seeded(seed, 0);
    let eps: Vec<DVector<f64>> = (0..n)
        .map(|_| {
            DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(&mut rng)))
        })
        .collect();
    let grads: Vec<Result<DVector<f64>>> = eps
        .par_iter()
        .map(|e| target.eval_gradient((mu + &l * e).as_slice()))
        .collect();
    let grads = grads.into_iter().collect::<Result<Vec<_>>>()?;
    let (gradient, std_error) = reduce(n, params.n_params(), |i| {
        let mut g = DVector::zeros(params.n_params());
        let gp = &grads[i];
        let e = &eps[i];
        let mo = params.mean_offset(0);
        for r in 0..d {
            g[mo + r] = -gp[r];
        }
        let mut pos = params.chol_offset(0);
        for r in 0..d {
            for c in 0..=r {
                let mut v = -gp[r] * e[c];
                if r == c {
                    v = (v - 1.0 / l[(r, r)]) * l[(r, r)];
                }
                g[pos] = v;
                pos += 1;
            }
        }
        g
    });
    Ok(GradientEstimate { gradient, std_error, n_samples: n, support_violations: 0 })
}
