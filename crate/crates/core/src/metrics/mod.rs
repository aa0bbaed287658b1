//! Monte Carlo divergences and Gaussian overlap.

mod grid;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::density::{GaussianComponent, SampleableDensity};
use crate::error::{check_dim, Error, Result};
use crate::rng::seeded;

pub use grid::GridDensity2d;

/// Largest log-ratio admitted before exponentiation.
pub const LOG_RATIO_CLAMP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    /// Samples where the second density vanished.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub support_violations: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_pair(p: &dyn SampleableDensity, q: &dyn SampleableDensity, n: usize) -> Result<()> {
    check_dim(p.dim(), q.dim())?;
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one Monte Carlo sample".into()));
    }
    Ok(())
}

/// Clamped `log p - log q`, flagging points where `q` vanishes.
fn log_ratio(lp: f64, lq: f64) -> (f64, bool) {
    if lq == f64::NEG_INFINITY {
        return (LOG_RATIO_CLAMP, true);
    }
    ((lp - lq).min(LOG_RATIO_CLAMP), false)
}

/// `KL(p ‖ q)` by sampling from `p`.
pub fn kl_mc(
    p: &dyn SampleableDensity,
    q: &dyn SampleableDensity,
    n: usize,
    seed: u64,
) -> Result<DivergenceEstimate> {
    check_pair(p, q, n)?;
    let mut rng = seeded(seed, 0);
    let draws = p.sample(n, &mut rng);
    let terms: Vec<(f64, bool)> = draws
        .par_iter()
        .map(|z| log_ratio(p.log_pdf(z.as_slice()), q.log_pdf(z.as_slice())))
        .collect();
    let violations = terms.iter().filter(|t| t.1).count();
    let values: Vec<f64> = terms.into_iter().map(|t| t.0).collect();
    let (value, std_error) = mean_and_se(&values);
    Ok(DivergenceEstimate { value, std_error, n_samples: n, support_violations: violations })
}

/// `KL(a ‖ (a + b)/2)` terms at draws from `a`.
fn kl_to_midpoint(
    a: &dyn SampleableDensity,
    b: &dyn SampleableDensity,
    n: usize,
    seed: u64,
    stream: u64,
) -> (Vec<f64>, usize) {
    let mut rng = seeded(seed, stream);
    let draws = a.sample(n, &mut rng);
    let terms: Vec<(f64, bool)> = draws
        .par_iter()
        .map(|z| {
            let la = a.log_pdf(z.as_slice());
            let lb = b.log_pdf(z.as_slice());
            let hi = la.max(lb);
            let lm = if hi == f64::NEG_INFINITY {
                hi
            } else {
                hi + ((la - hi).exp() + (lb - hi).exp()).ln() - LN_2
            };
            log_ratio(la, lm)
        })
        .collect();
    let violations = terms.iter().filter(|t| t.1).count();
    (terms.into_iter().map(|t| t.0).collect(), violations)
}

/// Jensen–Shannon divergence divided by `ln 2`, so that it lies in `[0, 1]`.
/// Each half uses `n` draws from its own first argument.
pub fn jsd_normalized(
    p: &dyn SampleableDensity,
    q: &dyn SampleableDensity,
    n: usize,
    seed: u64,
) -> Result<DivergenceEstimate> {
    check_pair(p, q, n)?;
    let (tp, vp) = kl_to_midpoint(p, q, n, seed, 1);
    let (tq, vq) = kl_to_midpoint(q, p, n, seed, 2);
    let (mp, sp) = mean_and_se(&tp);
    let (mq, sq) = mean_and_se(&tq);
    let scale = 0.5 / LN_2;
    Ok(DivergenceEstimate {
        value: (mp + mq) * scale,
        std_error: (sp * sp + sq * sq).sqrt() * scale,
        n_samples: 2 * n,
        support_violations: vp + vq,
    })
}

/// Dice overlap `2∫N₁N₂ / (∫N₁² + ∫N₂²)` in closed form.
pub fn dice_overlap(p1: &GaussianComponent, p2: &GaussianComponent) -> Result<f64> {
    check_dim(p1.dim(), p2.dim())?;
    let d = p1.dim() as f64;
    let sum = crate::density::symmetrize(p1.covariance() + p2.covariance());
    let delta = p1.mean() - p2.mean();
    let cross = GaussianComponent::from_covariance(nalgebra::DVector::zeros(p1.dim()), &sum)?
        .log_pdf(delta.as_slice());
    // ∫N² = N(0; 0, 2Σ) = (4π)^(-d/2) |Σ|^(-1/2)
    let self_term = |c: &GaussianComponent| -0.5 * d * (4.0 * std::f64::consts::PI).ln() - 0.5 * c.log_det();
    let (a, b) = (self_term(p1), self_term(p2));
    let hi = a.max(b);
    let denom = hi + ((a - hi).exp() + (b - hi).exp()).ln();
    Ok((LN_2 + cross - denom).exp().clamp(0.0, 1.0))
}
