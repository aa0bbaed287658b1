use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::density::{GaussianComponent, MixtureModel, UnnormalizedTarget};
use crate::error::{Error, Result};
use crate::rng::seeded;

use super::nnls::nnls;

/// Nonnegative least-squares fit of component weights to `φ`.
#[derive(Debug, Clone)]
pub struct WeightFit {
    /// Unnormalized weights `π̃` in the scale of `φ`.
    pub weights: Vec<f64>,
    /// `log` of each weight, finite even when `weights` over- or underflows.
    pub log_weights: Vec<f64>,
    /// Root-mean-square residual `‖φ - M π̃‖ / √N`.
    pub residual: f64,
    /// `max log φ` over the sample; `φ` was divided by `exp` of this.
    pub log_offset: f64,
}

/// Sample `n` points from the equal-weight mixture of `components`, then solve
/// `min ‖φ - M π̃‖²` over `π̃ ≥ 0` where `M[i, k] = N_k(z_i)`.
pub fn solve_weights(
    target: &UnnormalizedTarget,
    components: &[GaussianComponent],
    n: usize,
    seed: u64,
) -> Result<WeightFit> {
    let k = components.len();
    if k == 0 {
        return Err(Error::InvalidArgument("no components to weight".into()));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!(
            "need at least as many weight samples as components ({n} < {k})"
        )));
    }
    let proposal = MixtureModel::new(components.to_vec(), vec![1.0 / k as f64; k])?;
    let mut rng = seeded(seed, 0);
    let points = proposal.sample_with(n, &mut rng);

    let log_phi: Vec<f64> = points
        .par_iter()
        .map(|z| {
            let v = target.density().log_density(z.as_slice());
            if v.is_nan() {
                f64::NEG_INFINITY
            } else {
                v
            }
        })
        .collect();
    let offset = log_phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !offset.is_finite() {
        return Err(Error::Scaling);
    }
    let phi = DVector::from_iterator(n, log_phi.iter().map(|v| (v - offset).exp()));
    if phi.iter().all(|v| *v == 0.0) {
        return Err(Error::Scaling);
    }

    // columns are normalized before the solve and the scaling undone after
    let mut design = DMatrix::from_fn(n, k, |i, j| components[j].log_pdf(points[i].as_slice()).exp());
    let mut col_norm = vec![0.0; k];
    for j in 0..k {
        let nrm = design.column(j).norm();
        col_norm[j] = if nrm > 0.0 { nrm } else { 1.0 };
        design.column_mut(j).unscale_mut(col_norm[j]);
    }
    let sol = nnls(&design, &phi)?;
    let scaled: Vec<f64> = (0..k).map(|j| sol.x[j] / col_norm[j]).collect();
    let log_weights: Vec<f64> = scaled.iter().map(|w| w.ln() + offset).collect();
    let weights: Vec<f64> = log_weights.iter().map(|lw| lw.exp()).collect();
    let residual = sol.residual_norm / (n as f64).sqrt() * offset.exp();
    Ok(WeightFit { weights, log_weights, residual, log_offset: offset })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{SearchBox, Scaled};
    use nalgebra::{dmatrix, dvector};
    use std::sync::Arc;

    fn target_of(m: MixtureModel, log_scale: f64) -> UnnormalizedTarget {
        let d = m.dim();
        UnnormalizedTarget::new(
            Arc::new(Scaled { inner: m, log_scale }),
            SearchBox::cube(d, -20.0, 20.0).unwrap(),
        )
        .unwrap()
    }

    fn two_components() -> (GaussianComponent, GaussianComponent) {
        let a = GaussianComponent::from_covariance(dvector![-3.0, 0.0], &dmatrix![1.0, 0.2; 0.2, 0.5])
            .unwrap();
        let b = GaussianComponent::from_covariance(dvector![3.0, 1.0], &dmatrix![0.7, 0.0; 0.0, 1.3])
            .unwrap();
        (a, b)
    }

    #[test]
    fn single_scaled_gaussian() {
        let (a, _) = two_components();
        let t = target_of(MixtureModel::single(a.clone()), 2.0f64.ln());
        let fit = solve_weights(&t, &[a], 64, 7).unwrap();
        assert!((fit.weights[0] - 2.0).abs() < 1e-8);
        assert!(fit.residual < 1e-8);
    }

    #[test]
    fn recovers_true_weights() {
        let (a, b) = two_components();
        let m = MixtureModel::new(vec![a.clone(), b.clone()], vec![0.3, 0.7]).unwrap();
        let fit = solve_weights(&target_of(m, 0.0), &[a, b], 512, 1).unwrap();
        let s: f64 = fit.weights.iter().sum();
        assert!((fit.weights[0] / s - 0.3).abs() < 1e-3);
        assert!((fit.weights[1] / s - 0.7).abs() < 1e-3);
    }

    #[test]
    fn spurious_component_gets_no_weight() {
        let (a, b) = two_components();
        let far = GaussianComponent::from_covariance(dvector![15.0, -15.0], &DMatrix::identity(2, 2))
            .unwrap();
        let m = MixtureModel::new(vec![a.clone(), b.clone()], vec![0.4, 0.6]).unwrap();
        let fit = solve_weights(&target_of(m, 0.0), &[a, b, far], 1024, 3).unwrap();
        assert!(fit.weights[2] <= 1e-6, "{:?}", fit.weights);
    }

    #[test]
    fn huge_log_offset_does_not_overflow_logs() {
        let (a, _) = two_components();
        let t = target_of(MixtureModel::single(a.clone()), 900.0);
        let fit = solve_weights(&t, &[a], 32, 0).unwrap();
        assert!((fit.log_weights[0] - 900.0).abs() < 1e-8);
    }

    #[test]
    fn underflow_everywhere_is_a_scaling_error() {
        let (a, _) = two_components();
        let t = UnnormalizedTarget::from_fn(2, |_: &[f64]| f64::NEG_INFINITY, SearchBox::cube(2, -1.0, 1.0).unwrap())
            .unwrap();
        assert!(matches!(solve_weights(&t, &[a], 16, 0), Err(Error::Scaling)));
    }
}
