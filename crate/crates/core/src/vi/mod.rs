//! Variational refinement of a mixture surrogate by stochastic descent on the
//! negative ELBO.

mod gradient;
mod params;

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::density::{GaussianComponent, MixtureModel, SampleableDensity, SearchBox, UnnormalizedTarget};
use crate::error::{Error, Result};
use crate::metrics::jsd_normalized;
use crate::rng::{mix_seed, seeded};

pub use gradient::{
    negative_elbo_estimate, reparam_gradient_single_gaussian, score_function_gradient, ElboEstimate,
    GradientEstimate, OUT_OF_SUPPORT_PENALTY,
};
pub use params::VariationalParams;

const ELBO_SALT: u64 = 0x454c_424f;
const JSD_SALT: u64 = 0x4a53_44;
const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViConfig {
    /// Draws per gradient estimate.
    pub n_mc_samples: usize,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub max_epochs: usize,
    /// Gradient steps between negative-ELBO evaluations.
    pub steps_per_epoch: usize,
    /// Epochs between JSD evaluations against the reference.
    pub report_interval: usize,
    /// Draws for the per-epoch negative-ELBO estimate.
    pub n_elbo_samples: usize,
    /// Draws per half of the JSD estimate.
    pub n_jsd_samples: usize,
    pub seed: u64,
    pub baseline: bool,
}

impl Default for ViConfig {
    fn default() -> Self {
        Self {
            n_mc_samples: 128,
            step_size: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            max_epochs: 100,
            steps_per_epoch: 10,
            report_interval: 1,
            n_elbo_samples: 1024,
            n_jsd_samples: 2000,
            seed: 0,
            baseline: true,
        }
    }
}

impl ViConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::InvalidArgument("beta1 and beta2 must lie in (0, 1)".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidArgument("step_size must be positive".into()));
        }
        if self.n_mc_samples < if self.baseline { 2 } else { 1 } {
            return Err(Error::InvalidArgument("n_mc_samples too small".into()));
        }
        if self.steps_per_epoch == 0 || self.report_interval == 0 || self.n_elbo_samples == 0 {
            return Err(Error::InvalidArgument(
                "steps_per_epoch, report_interval and n_elbo_samples must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub epoch: usize,
    /// Optimization time so far, excluding JSD evaluation.
    pub elapsed_seconds: f64,
    pub neg_elbo: f64,
    pub best_neg_elbo: f64,
    pub jsd: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViTrace {
    pub records: Vec<TraceRecord>,
    pub diverged: bool,
    pub best_epoch: usize,
    pub support_violations: usize,
}

impl ViTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,elapsed_seconds,neg_elbo,jsd\n");
        for r in &self.records {
            let jsd = r.jsd.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{}", r.epoch, r.elapsed_seconds, r.neg_elbo, jsd);
        }
        s
    }
}

struct Adam {
    m: DVector<f64>,
    v: DVector<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: DVector::zeros(n), v: DVector::zeros(n), t: 0 }
    }

    fn step(&mut self, x: &mut DVector<f64>, g: &DVector<f64>, cfg: &ViConfig) {
        self.t += 1;
        self.m = &self.m * cfg.beta1 + g * (1.0 - cfg.beta1);
        self.v = &self.v * cfg.beta2 + g.component_mul(g) * (1.0 - cfg.beta2);
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..x.len() {
            x[i] -= cfg.step_size * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

/// Adam on the negative ELBO from `init`, returning the iterate with the
/// lowest per-epoch estimate and the trace.
///
/// Per-epoch estimates share one seed, so comparisons between epochs use
/// common random numbers.
pub fn refine(
    init: &MixtureModel,
    target: &UnnormalizedTarget,
    cfg: &ViConfig,
    reference: Option<&dyn SampleableDensity>,
) -> Result<(MixtureModel, ViTrace)> {
    cfg.validate()?;
    let start = VariationalParams::from_mixture(init);
    let (k, d) = (start.n_components(), start.dim());
    let elbo_seed = mix_seed(cfg.seed, ELBO_SALT);
    let jsd_seed = mix_seed(cfg.seed, JSD_SALT);

    let mut trace = ViTrace::default();
    let mut elapsed = 0.0;
    let mut clock = Instant::now();
    let mut x = start.to_flat();
    let mut adam = Adam::new(x.len());

    let first = negative_elbo_estimate(&start, target, cfg.n_elbo_samples, elbo_seed)?;
    let limit = DIVERGENCE_FACTOR * first.value.abs().max(1.0);
    let mut best = (first.value, start.clone());
    trace.support_violations += first.support_violations;

    let record = |trace: &mut ViTrace,
                      epoch: usize,
                      elapsed: f64,
                      neg_elbo: f64,
                      best: f64,
                      p: &VariationalParams|
     -> Result<()> {
        let jsd = match reference {
            Some(r) if epoch % cfg.report_interval == 0 => {
                Some(jsd_normalized(r, &p.to_mixture()?, cfg.n_jsd_samples, jsd_seed)?.value)
            }
            _ => None,
        };
        trace.records.push(TraceRecord { epoch, elapsed_seconds: elapsed, neg_elbo, best_neg_elbo: best, jsd });
        Ok(())
    };
    elapsed += clock.elapsed().as_secs_f64();
    record(&mut trace, 0, elapsed, first.value, first.value, &start)?;
    clock = Instant::now();

    for epoch in 1..=cfg.max_epochs {
        for step in 0..cfg.steps_per_epoch {
            let p = VariationalParams::from_flat(k, d, &x)?;
            let seed = mix_seed(cfg.seed, ((epoch as u64) << 32) | step as u64);
            let g = score_function_gradient(&p, target, cfg.n_mc_samples, seed, cfg.baseline)?;
            trace.support_violations += g.support_violations;
            adam.step(&mut x, &g.gradient, cfg);
        }
        let p = VariationalParams::from_flat(k, d, &x)?;
        let est = negative_elbo_estimate(&p, target, cfg.n_elbo_samples, elbo_seed)?;
        trace.support_violations += est.support_violations;
        if est.value < best.0 {
            best = (est.value, p.clone());
            trace.best_epoch = epoch;
        }
        elapsed += clock.elapsed().as_secs_f64();
        let diverged = !est.value.is_finite() || est.value > limit;
        record(&mut trace, epoch, elapsed, est.value, best.0, &p)?;
        clock = Instant::now();
        if diverged {
            log::warn!("negative ELBO {} exceeded the divergence limit at epoch {epoch}", est.value);
            trace.diverged = true;
            break;
        }
    }
    Ok((best.1.to_mixture()?, trace))
}

/// Uniform means in the box, covariance `(width / 10)²` per axis, equal weights.
pub fn random_cold_start(dim: usize, k: usize, search_box: &SearchBox, seed: u64) -> Result<MixtureModel> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one component".into()));
    }
    crate::error::check_dim(search_box.dim(), dim)?;
    let mut rng = seeded(seed, 0);
    let widths: Vec<f64> = (0..dim).map(|i| search_box.upper()[i] - search_box.lower()[i]).collect();
    let chol = DMatrix::from_diagonal(&DVector::from_iterator(dim, widths.iter().map(|w| w / 10.0)));
    let comps = (0..k)
        .map(|_| {
            let u: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            GaussianComponent::new(search_box.from_unit(&u), chol.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    MixtureModel::new(comps, vec![1.0 / k as f64; k])
}

#[cfg(test)]
mod tests;
