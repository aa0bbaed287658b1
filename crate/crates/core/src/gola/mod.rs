//! Multistart optimization, Laplace approximation, Mahalanobis dedup and
//! least-squares weighting of an unnormalized density.

mod dedup;
mod laplace;
mod local;
pub mod nnls;
mod weights;

use serde::{Deserialize, Serialize};

use crate::density::{MixtureModel, UnnormalizedTarget};
use crate::error::{Error, Result};
use crate::rng::mix_seed;

pub use dedup::{dedup_modes, DedupOutcome, DedupRecord};
pub use laplace::laplace_at_mode;
pub use local::{local_minimize, multistart_minimize, LocalMinimum};
pub use weights::{solve_weights, WeightFit};

/// Local search direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalMethod {
    #[default]
    GradientDescent,
    Bfgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GolaConfig {
    /// Number of Sobol starts; `32 * dim` when unset.
    pub n_starts: Option<usize>,
    pub max_local_iters: usize,
    pub gradient_tol: f64,
    /// Survival threshold `t` of the duplicate test.
    pub dedup_threshold: f64,
    /// Weight-fit sample size; `1024 * K` when unset.
    pub n_weight_samples: Option<usize>,
    pub master_seed: u64,
    pub local_method: LocalMethod,
}

impl Default for GolaConfig {
    fn default() -> Self {
        Self {
            n_starts: None,
            max_local_iters: 10_000,
            gradient_tol: 1e-8,
            dedup_threshold: 0.01,
            n_weight_samples: None,
            master_seed: 0,
            local_method: LocalMethod::GradientDescent,
        }
    }
}

impl GolaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == Some(0) {
            return Err(Error::InvalidArgument("n_starts must be at least 1".into()));
        }
        if !(self.dedup_threshold > 0.0 && self.dedup_threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "dedup_threshold must lie in (0, 1), got {}",
                self.dedup_threshold
            )));
        }
        if !(self.gradient_tol > 0.0 && self.gradient_tol.is_finite()) {
            return Err(Error::InvalidArgument("gradient_tol must be positive".into()));
        }
        if self.n_weight_samples == Some(0) {
            return Err(Error::InvalidArgument("n_weight_samples must be positive".into()));
        }
        Ok(())
    }

    pub fn resolved_starts(&self, dim: usize) -> usize {
        self.n_starts.unwrap_or(32 * dim)
    }

    pub fn resolved_weight_samples(&self, n_components: usize) -> usize {
        self.n_weight_samples.unwrap_or(1024 * n_components)
    }
}

/// Everything produced by [`run_gola`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GolaReport {
    pub mixture: MixtureModel,
    /// `Z = Σ π̃_k`, the evidence estimate.
    pub evidence: f64,
    pub log_evidence: f64,
    pub unnormalized_weights: Vec<f64>,
    pub weight_residual: f64,
    pub n_weight_samples: usize,
    /// Every local run, converged or not, in start order.
    pub raw_minima: Vec<LocalMinimum>,
    /// Rule applied by the duplicate test.
    pub dedup_rule: String,
    pub dedup_log: Vec<DedupRecord>,
    pub config: GolaConfig,
}

pub const DEDUP_RULE: &str =
    "duplicate of component k iff chi2_survival(D_M^2, dof = dim) >= t; new iff survival < t for every k";

impl GolaReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Fit a Gaussian mixture to `φ` and estimate its integral.
pub fn run_gola(target: &UnnormalizedTarget, cfg: &GolaConfig) -> Result<GolaReport> {
    cfg.validate()?;
    let raw = local::multistart_runs(target, cfg)?;
    let mut converged: Vec<LocalMinimum> = raw.iter().filter(|m| m.converged).cloned().collect();
    if converged.is_empty() {
        return Err(Error::NoModesFound { runs: cfg.resolved_starts(target.dim()) });
    }
    local::sort_minima(&mut converged);
    log::info!("{} of {} local runs converged", converged.len(), raw.len());

    let dedup = dedup_modes(&converged, target, cfg.dedup_threshold)?;
    let k = dedup.components.len();
    let n = cfg.resolved_weight_samples(k);
    log::info!("{k} distinct modes; fitting weights on {n} samples");

    let fit = solve_weights(target, &dedup.components, n, mix_seed(cfg.master_seed, 0x5745_4947))?;
    let log_evidence = log_sum(&fit.log_weights);
    if !log_evidence.is_finite() {
        return Err(Error::Scaling);
    }
    let normalized: Vec<f64> = fit.log_weights.iter().map(|lw| (lw - log_evidence).exp()).collect();
    let mixture = MixtureModel::new(dedup.components, normalized)?;
    Ok(GolaReport {
        mixture,
        evidence: log_evidence.exp(),
        log_evidence,
        unnormalized_weights: fit.weights,
        weight_residual: fit.residual,
        n_weight_samples: n,
        raw_minima: raw,
        dedup_rule: DEDUP_RULE.to_string(),
        dedup_log: dedup.log,
        config: cfg.clone(),
    })
}

fn log_sum(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
