use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::density::{GaussianComponent, MixtureModel, SampleableDensity, SearchBox, SinhArcsinhMixture, UnnormalizedTarget};
use crate::error::{Error, Result};
use crate::exemplar::ExemplarScenario;
use crate::sensibench::truth_target;

use super::config::TargetConfig;

pub const BUILTINS: [&str; 4] = ["gauss2d", "bimodal2d", "sinh_arcsinh", "exemplar"];

/// `N((1, -0.5), [[1, 0.3], [0.3, 0.5]])` on `[-6, 6]²`.
pub fn gauss2d() -> MixtureModel {
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
    let c = GaussianComponent::from_covariance(DVector::from_vec(vec![1.0, -0.5]), &cov)
        .expect("built-in covariance is positive definite");
    MixtureModel::single(c)
}

/// Two separated, differently shaped Gaussians with weights 0.4 and 0.6.
pub fn bimodal2d() -> MixtureModel {
    let a = GaussianComponent::from_covariance(
        DVector::from_vec(vec![-2.0, 0.0]),
        &DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]),
    )
    .expect("positive definite");
    let b = GaussianComponent::from_covariance(
        DVector::from_vec(vec![2.0, 1.0]),
        &DMatrix::from_row_slice(2, 2, &[0.4, -0.15, -0.15, 0.6]),
    )
    .expect("positive definite");
    MixtureModel::new(vec![a, b], vec![0.4, 0.6]).expect("valid weights")
}

pub fn read_mixture(path: &Path) -> Result<MixtureModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    MixtureModel::from_json(&text)
}

/// A resolved target and, when it has one, its normalized form.
pub struct ResolvedTarget {
    pub target: UnnormalizedTarget,
    pub normalized: Option<Arc<dyn SampleableDensity>>,
}

pub fn resolve_target(cfg: &TargetConfig, exemplar: &ExemplarScenario) -> Result<ResolvedTarget> {
    if let Some(path) = &cfg.mixture {
        let m = read_mixture(path)?;
        let target = truth_target(&m)?;
        return Ok(ResolvedTarget { target, normalized: Some(Arc::new(m)) });
    }
    let name = cfg.name.as_deref().ok_or_else(|| Error::Config("no target given".into()))?;
    let check_dim = |d: usize| match cfg.dim {
        Some(x) if x != d => Err(Error::Config(format!("target `{name}` is {d}-dimensional, got dim = {x}"))),
        _ => Ok(()),
    };
    match name {
        "gauss2d" | "bimodal2d" => {
            check_dim(2)?;
            let (m, half) = if name == "gauss2d" { (gauss2d(), 6.0) } else { (bimodal2d(), 8.0) };
            let target = UnnormalizedTarget::new(Arc::new(m.clone()), SearchBox::cube(2, -half, half)?)?;
            Ok(ResolvedTarget { target, normalized: Some(Arc::new(m)) })
        }
        "sinh_arcsinh" => {
            let m = SinhArcsinhMixture::random_two_mode(cfg.dim.unwrap_or(2), cfg.seed)?;
            Ok(ResolvedTarget { target: m.to_target(), normalized: Some(Arc::new(m)) })
        }
        "exemplar" => {
            check_dim(2)?;
            Ok(ResolvedTarget { target: exemplar.target()?, normalized: None })
        }
        other => Err(Error::Config(format!("unknown built-in target `{other}`"))),
    }
}
