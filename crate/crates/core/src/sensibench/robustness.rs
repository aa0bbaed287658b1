use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{MixtureModel, SearchBox, UnnormalizedTarget};
use crate::error::Result;
use crate::gola::{run_gola, GolaConfig};
use crate::metrics::jsd_normalized;
use crate::rng::{mix_seed, seeded};

use super::{generate_test_gmm, FactorSpec, GmmFactors};

/// Normalized JSD at or below which a fit counts as near perfect.
pub const FIT_THRESHOLD: f64 = 0.05;

/// Half-width added around the extreme means to form the search box.
const BOX_MARGIN: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCase {
    pub case: usize,
    pub factors: GmmFactors,
    /// Normalized JSD between truth and fit; 1 for failed cases.
    pub y: f64,
    pub y_std_error: f64,
    pub n_components_found: usize,
    /// `ok`, or the kind of the error that ended the case.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessStudy {
    pub cases: Vec<RobustnessCase>,
    pub threshold: f64,
    /// Share of cases with `Y ≤ threshold`.
    pub fraction_within: f64,
    pub mean_y: f64,
}

impl RobustnessStudy {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("case,d,M,omega,c,lambda,Y,status\n");
        for c in &self.cases {
            let f = &c.factors;
            let _ = writeln!(s, "{},{},{},{},{},{},{},{}", c.case, f.d, f.m, f.omega, f.c, f.lambda, c.y, c.status);
        }
        s
    }
}

/// Target `log φ = log p_truth` confined to a box around its means.
pub fn truth_target(truth: &MixtureModel) -> Result<UnnormalizedTarget> {
    let d = truth.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for c in truth.components() {
        for i in 0..d {
            let sd = c.covariance()[(i, i)].sqrt();
            lo[i] = lo[i].min(c.mean()[i] - BOX_MARGIN * sd);
            hi[i] = hi[i].max(c.mean()[i] + BOX_MARGIN * sd);
        }
    }
    UnnormalizedTarget::new(Arc::new(truth.clone()), SearchBox::new(lo, hi)?)
}

/// `Y` for one factor draw; errors surface as worst-case scores.
pub fn score_case(f: &GmmFactors, gola_cfg: &GolaConfig, jsd_samples: usize, seed: u64) -> RobustnessCase {
    let run = || -> Result<(f64, f64, usize)> {
        let truth = generate_test_gmm(f, mix_seed(seed, 1))?;
        let target = truth_target(&truth)?;
        let cfg = GolaConfig { master_seed: mix_seed(seed, 2), ..gola_cfg.clone() };
        let report = run_gola(&target, &cfg)?;
        let j = jsd_normalized(&truth, &report.mixture, jsd_samples, mix_seed(seed, 3))?;
        Ok((j.value.clamp(0.0, 1.0), j.std_error, report.mixture.n_components()))
    };
    match run() {
        Ok((y, se, k)) => RobustnessCase {
            case: 0,
            factors: *f,
            y,
            y_std_error: se,
            n_components_found: k,
            status: "ok".into(),
        },
        Err(e) => {
            log::warn!("robustness case failed: {e}");
            RobustnessCase { case: 0, factors: *f, y: 1.0, y_std_error: 0.0, n_components_found: 0, status: e.kind().into() }
        }
    }
}

/// Score `n_cases` mixtures drawn from `spec` against their pipeline fits.
pub fn robustness_study(
    spec: &FactorSpec,
    n_cases: usize,
    gola_cfg: &GolaConfig,
    jsd_samples: usize,
    seed: u64,
) -> Result<RobustnessStudy> {
    spec.validate_gmm()?;
    gola_cfg.validate()?;
    let draws: Vec<GmmFactors> = (0..n_cases)
        .map(|i| GmmFactors::from_slice(&spec.sample(&mut seeded(seed, i as u64))))
        .collect::<Result<_>>()?;
    let cases: Vec<RobustnessCase> = draws
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let mut c = score_case(f, gola_cfg, jsd_samples, mix_seed(seed, 0x1000 + i as u64));
            c.case = i;
            c
        })
        .collect();
    let n = cases.len().max(1) as f64;
    let fraction_within = cases.iter().filter(|c| c.y <= FIT_THRESHOLD).count() as f64 / n;
    let mean_y = cases.iter().map(|c| c.y).sum::<f64>() / n;
    Ok(RobustnessStudy { cases, threshold: FIT_THRESHOLD, fraction_within, mean_y })
}
