use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use super::{log_sum_exp, GaussianComponent, LogDensity, SampleableDensity};
use crate::error::{check_dim, Error, Result};
use crate::rng::{seeded, Rng};

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Finite mixture of Gaussians `Σ_k π_k N(μ_k, Σ_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureJson", into = "MixtureJson")]
pub struct MixtureModel {
    components: Vec<GaussianComponent>,
    weights: Vec<f64>,
}

impl MixtureModel {
    /// Weights must be nonnegative and sum to one (to 1e-9); they are
    /// renormalized exactly.
    pub fn new(components: Vec<GaussianComponent>, weights: Vec<f64>) -> Result<Self> {
        let sum = validate_parts(&components, &weights)?;
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "mixture weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self::normalized(components, weights, sum))
    }

    /// Mixture from nonnegative weights of arbitrary positive total.
    pub fn from_unnormalized(components: Vec<GaussianComponent>, weights: Vec<f64>) -> Result<Self> {
        let sum = validate_parts(&components, &weights)?;
        Ok(Self::normalized(components, weights, sum))
    }

    pub fn single(component: GaussianComponent) -> Self {
        Self {
            components: vec![component],
            weights: vec![1.0],
        }
    }

    fn normalized(components: Vec<GaussianComponent>, weights: Vec<f64>, sum: f64) -> Self {
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Self {
            components,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Per-component `log π_k + log N_k(z)`; `-inf` for zero weights.
    fn weighted_log_terms(&self, z: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .zip(&self.weights)
            .map(|(c, &w)| {
                if w > 0.0 {
                    w.ln() + c.log_pdf(z)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect()
    }

    pub fn log_pdf(&self, z: &[f64]) -> f64 {
        log_sum_exp(&self.weighted_log_terms(z))
    }

    /// Posterior component probabilities at `z`.
    pub fn responsibilities(&self, z: &[f64]) -> Vec<f64> {
        let terms = self.weighted_log_terms(z);
        let total = log_sum_exp(&terms);
        terms.iter().map(|t| (t - total).exp()).collect()
    }

    pub fn grad_log_pdf(&self, z: &[f64]) -> DVector<f64> {
        let r = self.responsibilities(z);
        let mut g = DVector::zeros(self.dim());
        for (c, rk) in self.components.iter().zip(r) {
            if rk > 0.0 {
                g += c.grad_log_pdf(z) * rk;
            }
        }
        g
    }

    /// Hessian of `-log q`:
    /// `Σ r_k Σ_k⁻¹ - Σ r_k a_k a_kᵀ + ḡ ḡᵀ` with `a_k = ∇ log N_k`, `ḡ = Σ r_k a_k`.
    pub fn neg_log_hessian_at(&self, z: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let r = self.responsibilities(z);
        let mut h = DMatrix::zeros(d, d);
        let mut gbar = DVector::zeros(d);
        for (c, rk) in self.components.iter().zip(r) {
            if rk > 0.0 {
                let a = c.grad_log_pdf(z);
                h += c.precision() * rk;
                h -= &a * a.transpose() * rk;
                gbar += a * rk;
            }
        }
        h += &gbar * gbar.transpose();
        super::symmetrize(h)
    }

    /// Ancestral sampling with a private generator.
    pub fn sample_with(&self, n: usize, rng: &mut Rng) -> Vec<DVector<f64>> {
        let picker = WeightedIndex::new(&self.weights).expect("weights validated");
        (0..n)
            .map(|_| {
                let k = picker.sample(rng);
                self.components[k].sample_one(rng)
            })
            .collect()
    }

    /// `n × d` matrix of draws, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seeded(seed, 0);
        let rows = self.sample_with(n, &mut rng);
        let mut out = DMatrix::zeros(n, self.dim());
        for (i, r) in rows.iter().enumerate() {
            out.set_row(i, &r.transpose());
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mixture serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn validate_parts(components: &[GaussianComponent], weights: &[f64]) -> Result<f64> {
    if components.is_empty() {
        return Err(Error::InvalidArgument("mixture needs at least one component".into()));
    }
    check_dim(components.len(), weights.len())?;
    let d = components[0].dim();
    for c in components {
        check_dim(d, c.dim())?;
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument(
            "mixture weights must be finite and nonnegative".into(),
        ));
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidArgument("mixture weights sum to zero".into()));
    }
    Ok(sum)
}

impl LogDensity for MixtureModel {
    fn dim(&self) -> usize {
        MixtureModel::dim(self)
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        self.log_pdf(z)
    }

    fn gradient(&self, z: &[f64]) -> Option<DVector<f64>> {
        Some(self.grad_log_pdf(z))
    }

    fn neg_log_hessian(&self, z: &[f64]) -> Option<DMatrix<f64>> {
        Some(self.neg_log_hessian_at(z))
    }
}

impl SampleableDensity for MixtureModel {
    fn dim(&self) -> usize {
        MixtureModel::dim(self)
    }

    fn log_pdf(&self, z: &[f64]) -> f64 {
        MixtureModel::log_pdf(self, z)
    }

    fn sample(&self, n: usize, rng: &mut Rng) -> Vec<DVector<f64>> {
        self.sample_with(n, rng)
    }
}

/// Interchange form: covariances travel as their lower Cholesky factor,
/// packed row by row (`L00, L10, L11, L20, ...`), `d(d+1)/2` entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureJson {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub components: Vec<ComponentJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentJson {
    pub mean: Vec<f64>,
    pub chol_cov_rowmajor_lower: Vec<f64>,
}

impl From<MixtureModel> for MixtureJson {
    fn from(m: MixtureModel) -> Self {
        let dim = m.dim();
        let components = m
            .components
            .iter()
            .map(|c| {
                let mut packed = Vec::with_capacity(dim * (dim + 1) / 2);
                for i in 0..dim {
                    for j in 0..=i {
                        packed.push(c.chol()[(i, j)]);
                    }
                }
                ComponentJson {
                    mean: c.mean().iter().copied().collect(),
                    chol_cov_rowmajor_lower: packed,
                }
            })
            .collect();
        MixtureJson {
            dim,
            weights: m.weights,
            components,
        }
    }
}

impl TryFrom<MixtureJson> for MixtureModel {
    type Error = Error;

    fn try_from(j: MixtureJson) -> Result<Self> {
        let d = j.dim;
        let mut comps = Vec::with_capacity(j.components.len());
        for (k, c) in j.components.into_iter().enumerate() {
            check_dim(d, c.mean.len())?;
            if c.chol_cov_rowmajor_lower.len() != d * (d + 1) / 2 {
                return Err(Error::InvalidArgument(format!(
                    "component {k}: chol_cov_rowmajor_lower needs {} entries, got {}",
                    d * (d + 1) / 2,
                    c.chol_cov_rowmajor_lower.len()
                )));
            }
            let mut l = DMatrix::zeros(d, d);
            let mut it = c.chol_cov_rowmajor_lower.into_iter();
            for i in 0..d {
                for jj in 0..=i {
                    l[(i, jj)] = it.next().expect("length checked");
                }
            }
            comps.push(GaussianComponent::new(DVector::from_vec(c.mean), l)?);
        }
        MixtureModel::new(comps, j.weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use std::f64::consts::PI;

    fn gauss1(mu: f64, sd: f64) -> GaussianComponent {
        GaussianComponent::new(DVector::from_vec(vec![mu]), dmatrix![sd]).unwrap()
    }

    #[test]
    fn degenerate_mixture_is_gaussian() {
        let c = gauss1(0.5, 2.0);
        let m = MixtureModel::single(c.clone());
        assert_eq!(m.log_pdf(&[1.7]), c.log_pdf(&[1.7]));
    }

    #[test]
    fn two_term_summation() {
        let m = MixtureModel::new(vec![gauss1(-1.0, 1.0), gauss1(1.0, 1.0)], vec![0.5, 0.5]).unwrap();
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        let expect = (0.5 * phi(0.0 + 1.0) + 0.5 * phi(0.0 - 1.0)).ln();
        assert!((m.log_pdf(&[0.0]) - expect).abs() < 1e-15);
        // symmetric midpoint: log 2 + log(0.5 N) = log N
        assert!((m.log_pdf(&[0.0]) - (2f64.ln() + 0.5f64.ln() + gauss1(1.0, 1.0).log_pdf(&[0.0]))).abs() < 1e-15);
    }

    #[test]
    fn far_tail_stays_finite() {
        let m = MixtureModel::new(vec![gauss1(-1.0, 1.0), gauss1(1.0, 1.0)], vec![0.3, 0.7]).unwrap();
        let z = 51.0; // 50σ from the nearer mean
        let v = m.log_pdf(&[z]);
        assert!(v.is_finite());
        // log(0.3 e^a + 0.7 e^b) = b + log(0.7 + 0.3 e^(a-b)), factored by hand
        let c = -0.5 * (2.0 * PI).ln();
        let a = c - 0.5 * (z + 1.0) * (z + 1.0);
        let b = c - 0.5 * (z - 1.0) * (z - 1.0);
        let expect = b + (0.7 + 0.3 * (a - b).exp()).ln();
        assert!((v - expect).abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn zero_weight_component_is_dropped() {
        let m = MixtureModel::new(vec![gauss1(0.0, 1.0), gauss1(3.0, 1.0)], vec![1.0, 0.0]).unwrap();
        assert_eq!(m.log_pdf(&[0.2]), gauss1(0.0, 1.0).log_pdf(&[0.2]));
        let s = m.sample(2000, 9);
        // every draw must come from the first component: none near 3 by chance
        // is not guaranteed, so check the sample mean instead
        let mean = s.column(0).mean();
        assert!(mean.abs() < 4.0 / (2000f64).sqrt());
    }

    #[test]
    fn weight_validation() {
        let c = vec![gauss1(0.0, 1.0), gauss1(1.0, 1.0)];
        assert!(MixtureModel::new(c.clone(), vec![0.5, 0.6]).is_err());
        assert!(MixtureModel::new(c.clone(), vec![1.5, -0.5]).is_err());
        assert!(MixtureModel::new(c.clone(), vec![1.0]).is_err());
        assert!(MixtureModel::new(vec![], vec![]).is_err());
        let m = MixtureModel::from_unnormalized(c, vec![2.0, 6.0]).unwrap();
        assert_eq!(m.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn json_schema_layout() {
        let c = GaussianComponent::new(
            DVector::from_vec(vec![1.0, 2.0]),
            dmatrix![1.0, 0.0; 0.5, 2.0],
        )
        .unwrap();
        let m = MixtureModel::single(c);
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["dim"], 2);
        assert_eq!(v["weights"], serde_json::json!([1.0]));
        assert_eq!(
            v["components"][0]["chol_cov_rowmajor_lower"],
            serde_json::json!([1.0, 0.5, 2.0])
        );
        assert_eq!(MixtureModel::from_json(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn json_rejects_bad_documents() {
        let bad_len = r#"{"dim":2,"weights":[1.0],"components":[{"mean":[0,0],"chol_cov_rowmajor_lower":[1,0,0,1]}]}"#;
        assert!(MixtureModel::from_json(bad_len).is_err());
        let extra = r#"{"dim":1,"weights":[1.0],"extra":1,"components":[{"mean":[0],"chol_cov_rowmajor_lower":[1]}]}"#;
        assert!(MixtureModel::from_json(extra).is_err());
    }

    #[test]
    fn analytic_hessian_matches_gradient_differences() {
        let m = MixtureModel::new(
            vec![
                GaussianComponent::from_covariance(
                    DVector::from_vec(vec![0.0, 0.0]),
                    &dmatrix![1.0, 0.3; 0.3, 0.5],
                )
                .unwrap(),
                GaussianComponent::from_covariance(
                    DVector::from_vec(vec![1.5, -0.5]),
                    &dmatrix![0.7, -0.2; -0.2, 1.2],
                )
                .unwrap(),
            ],
            vec![0.4, 0.6],
        )
        .unwrap();
        let z = [0.8, -0.1];
        let h = m.neg_log_hessian_at(&z);
        let eps = 1e-6;
        for j in 0..2 {
            let mut p = z;
            let mut q = z;
            p[j] += eps;
            q[j] -= eps;
            let col = -(m.grad_log_pdf(&p) - m.grad_log_pdf(&q)) / (2.0 * eps);
            for i in 0..2 {
                assert!((h[(i, j)] - col[i]).abs() < 1e-7, "({i},{j})");
            }
        }
    }
}
