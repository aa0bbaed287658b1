use super::*;
use crate::density::{Scaled, SinhArcsinhMixture};
use nalgebra::{dmatrix, dvector};
use std::sync::Arc;

fn gaussian(mean: DVector<f64>, cov: DMatrix<f64>) -> GaussianComponent {
    GaussianComponent::from_covariance(mean, &cov).unwrap()
}

fn target_of(m: MixtureModel, log_scale: f64) -> UnnormalizedTarget {
    let d = m.dim();
    UnnormalizedTarget::new(Arc::new(Scaled { inner: m, log_scale }), SearchBox::cube(d, -10.0, 10.0).unwrap())
        .unwrap()
}

fn single(mean: f64, var: f64) -> MixtureModel {
    MixtureModel::single(gaussian(dvector![mean], dmatrix![var]))
}

#[test]
fn neg_elbo_reference_values() {
    let q = VariationalParams::from_mixture(&single(0.0, 1.0));
    let e = negative_elbo_estimate(&q, &target_of(single(0.0, 1.0), 0.0), 10_000, 1).unwrap();
    assert!(e.value.abs() <= 3.0 * e.std_error + 1e-12);
    let e = negative_elbo_estimate(&q, &target_of(single(1.0, 1.0), 0.0), 10_000, 2).unwrap();
    assert!((e.value - 0.5).abs() <= 3.0 * e.std_error, "{e:?}");
    let e = negative_elbo_estimate(&q, &target_of(single(0.0, 1.0), 3.0f64.ln()), 1000, 3).unwrap();
    assert!((e.value + 3.0f64.ln()).abs() < 1e-12);
}

#[test]
fn out_of_support_samples_are_penalized() {
    let t = UnnormalizedTarget::from_fn(
        1,
        |z: &[f64]| if z[0] < 0.0 { f64::NEG_INFINITY } else { -z[0] },
        SearchBox::cube(1, -1.0, 5.0).unwrap(),
    )
    .unwrap();
    let q = VariationalParams::from_mixture(&single(0.0, 1.0));
    let e = negative_elbo_estimate(&q, &t, 1000, 0).unwrap();
    assert!(e.support_violations > 400 && e.support_violations < 600);
    assert!(e.value.is_finite() && e.value > 1e5);
}

#[test]
fn stationary_at_exact_posterior() {
    let m = MixtureModel::single(gaussian(dvector![0.5, -1.0], dmatrix![1.0, 0.3; 0.3, 0.6]));
    let p = VariationalParams::from_mixture(&m);
    let t = target_of(m, 0.0);
    let g = score_function_gradient(&p, &t, 1000, 0, true).unwrap();
    assert!(g.gradient.amax() < 1e-9);
    let g = reparam_gradient_single_gaussian(&p, &t, 20_000, 0).unwrap();
    for i in 0..g.gradient.len() {
        assert!(g.gradient[i].abs() <= 4.0 * g.std_error[i] + 1e-12);
    }
}

/// Analytic gradient of KL(q ‖ p) for Gaussians in the flat layout.
fn closed_form_kl_gradient(q: &VariationalParams, p: &GaussianComponent) -> DVector<f64> {
    let prec = p.precision();
    let l = q.chol(0);
    let gm = &prec * (&q.means[0] - p.mean());
    let mut gl = &prec * &l;
    for i in 0..l.nrows() {
        gl[(i, i)] = (gl[(i, i)] - 1.0 / l[(i, i)]) * l[(i, i)];
    }
    let mut out = vec![0.0];
    out.extend(gm.iter());
    for i in 0..l.nrows() {
        for j in 0..=i {
            out.push(gl[(i, j)]);
        }
    }
    DVector::from_vec(out)
}

#[test]
fn score_gradient_matches_closed_form_kl() {
    let truth = gaussian(dvector![1.0, -0.5], dmatrix![1.5, 0.4; 0.4, 0.8]);
    let q = VariationalParams::from_mixture(&MixtureModel::single(gaussian(
        dvector![0.2, 0.3],
        dmatrix![0.7, -0.1; -0.1, 1.2],
    )));
    let t = target_of(MixtureModel::single(truth.clone()), 0.0);
    let oracle = closed_form_kl_gradient(&q, &truth);
    let g = score_function_gradient(&q, &t, 100_000, 11, true).unwrap();
    for i in 1..oracle.len() {
        assert!(
            (g.gradient[i] - oracle[i]).abs() <= 4.0 * g.std_error[i],
            "coordinate {i}: {} vs {} (se {})",
            g.gradient[i],
            oracle[i],
            g.std_error[i]
        );
    }
    let r = reparam_gradient_single_gaussian(&q, &t, 100_000, 12).unwrap();
    for i in 1..oracle.len() {
        assert!((r.gradient[i] - oracle[i]).abs() <= 4.0 * r.std_error[i]);
    }
}

#[test]
fn pathwise_estimator_has_lower_variance() {
    let truth = gaussian(dvector![1.0, 0.0], dmatrix![1.0, 0.2; 0.2, 0.5]);
    let q = VariationalParams::from_mixture(&MixtureModel::single(GaussianComponent::standard(2)));
    let t = target_of(MixtureModel::single(truth), 0.0);
    let s = score_function_gradient(&q, &t, 1000, 5, true).unwrap();
    let r = reparam_gradient_single_gaussian(&q, &t, 1000, 5).unwrap();
    for i in 1..s.gradient.len() {
        assert!(r.std_error[i] <= s.std_error[i], "coordinate {i}");
    }
}

#[test]
fn estimators_agree_on_skewed_target() {
    let sas = SinhArcsinhMixture::random_two_mode(2, 4).unwrap();
    let t = sas.to_target();
    let q = VariationalParams::from_mixture(&MixtureModel::single(gaussian(
        dvector![-2.0, 2.0],
        dmatrix![0.6, 0.0; 0.0, 0.6],
    )));
    let s = score_function_gradient(&q, &t, 200_000, 1, true).unwrap();
    let r = reparam_gradient_single_gaussian(&q, &t, 50_000, 2).unwrap();
    for i in 1..s.gradient.len() {
        let tol = 4.0 * (s.std_error[i].powi(2) + r.std_error[i].powi(2)).sqrt();
        assert!((s.gradient[i] - r.gradient[i]).abs() <= tol, "coordinate {i}");
    }
}

#[test]
fn reparam_rejects_mixtures() {
    let m = MixtureModel::new(
        vec![GaussianComponent::standard(1), gaussian(dvector![3.0], dmatrix![1.0])],
        vec![0.5, 0.5],
    )
    .unwrap();
    let p = VariationalParams::from_mixture(&m);
    let err = reparam_gradient_single_gaussian(&p, &target_of(m, 0.0), 10, 0).unwrap_err();
    assert!(matches!(err, Error::Unsupported(_)));
}

#[test]
fn refine_from_optimum_stays_put() {
    let m = MixtureModel::single(gaussian(dvector![0.5, -1.0], dmatrix![1.0, 0.3; 0.3, 0.6]));
    let t = target_of(m.clone(), 0.0);
    let cfg = ViConfig { max_epochs: 20, ..ViConfig::default() };
    let (out, trace) = refine(&m, &t, &cfg, Some(&m)).unwrap();
    let j = jsd_normalized(&out, &m, 20_000, 3).unwrap();
    assert!(j.value <= 1e-3, "{j:?}");
    assert_eq!(trace.records.len(), 21);
    assert!(trace.records.iter().all(|r| r.jsd.is_some()));
}

#[test]
fn refine_improves_and_trace_is_consistent() {
    let truth = MixtureModel::new(
        vec![gaussian(dvector![-2.0], dmatrix![0.5]), gaussian(dvector![2.0], dmatrix![0.3])],
        vec![0.4, 0.6],
    )
    .unwrap();
    let t = target_of(truth, 0.7);
    let init = MixtureModel::new(
        vec![gaussian(dvector![-1.0], dmatrix![1.0]), gaussian(dvector![1.0], dmatrix![1.0])],
        vec![0.5, 0.5],
    )
    .unwrap();
    let cfg = ViConfig { max_epochs: 30, step_size: 5e-2, ..ViConfig::default() };
    let (_, trace) = refine(&init, &t, &cfg, None).unwrap();
    assert!(!trace.diverged);
    let recs = &trace.records;
    assert!(recs.last().unwrap().best_neg_elbo < recs[0].neg_elbo);
    for w in recs.windows(2) {
        assert!(w[1].epoch > w[0].epoch);
        assert!(w[1].elapsed_seconds >= w[0].elapsed_seconds);
        assert!(w[1].best_neg_elbo <= w[0].best_neg_elbo);
    }
    let csv = trace.to_csv();
    assert!(csv.starts_with("epoch,elapsed_seconds,neg_elbo,jsd\n"));
    assert!(csv.lines().nth(1).unwrap().ends_with(','));
}

#[test]
fn cold_start_properties() {
    let b = SearchBox::new(vec![-1.0, 0.0], vec![3.0, 10.0]).unwrap();
    let a = random_cold_start(2, 3, &b, 9).unwrap();
    assert_eq!(a.to_json(), random_cold_start(2, 3, &b, 9).unwrap().to_json());
    assert!((a.components()[0].covariance() - DMatrix::from_diagonal(&dvector![0.16, 1.0])).amax() < 1e-12);
    assert_eq!(random_cold_start(2, 1, &b, 4).unwrap().weights(), &[1.0]);
}

#[test]
fn cold_start_means_are_uniform() {
    let b = SearchBox::cube(1, 2.0, 6.0).unwrap();
    let mut counts = [0usize; 4];
    let n = 10_000;
    for seed in 0..n {
        let m = random_cold_start(1, 1, &b, seed).unwrap();
        let x = m.components()[0].mean()[0];
        counts[((x - 2.0) as usize).min(3)] += 1;
    }
    let e = n as f64 / 4.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    // 0.99 quantile of chi-square with 3 degrees of freedom
    assert!(chi2 < 11.345, "{counts:?}");
}

#[test]
fn config_validation() {
    assert!(ViConfig { beta1: 1.0, ..ViConfig::default() }.validate().is_err());
    assert!(ViConfig { step_size: 0.0, ..ViConfig::default() }.validate().is_err());
    assert!(ViConfig { n_mc_samples: 1, ..ViConfig::default() }.validate().is_err());
    assert!(ViConfig::default().validate().is_ok());
}
