use super::*;
use crate::density::{GaussianComponent, MixtureModel};
use nalgebra::{dmatrix, dvector};

fn frame(c: [f64; 2]) -> ShearFrame {
    ShearFrame::new([1.0, 1.0], [1.0, 1.0], c).unwrap()
}

/// Dormand–Prince 5(4) with tight tolerances.
fn rk45(a: &DMatrix<f64>, u0: &DVector<f64>, t_end: f64) -> DVector<f64> {
    const C: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0,
    ];
    let (mut t, mut u, mut h): (f64, DVector<f64>, f64) = (0.0, u0.clone(), 1e-3);
    while t < t_end {
        h = h.min(t_end - t);
        let mut k: Vec<DVector<f64>> = vec![a * &u];
        for row in C.iter() {
            let mut s = u.clone();
            for (j, c) in row.iter().enumerate().take(k.len()) {
                s += &k[j] * (h * c);
            }
            k.push(a * s);
        }
        let mut next = u.clone();
        for (j, c) in C[5].iter().enumerate() {
            next += &k[j] * (h * c);
        }
        let mut err = DVector::zeros(u.len());
        for (j, e) in E.iter().enumerate() {
            err += &k[j] * (h * e);
        }
        let tol = 1e-13 * (1.0 + next.amax());
        let ratio = err.amax() / tol;
        if ratio <= 1.0 {
            t += h;
            u = next;
        }
        h *= (0.9 * ratio.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
    u
}

#[test]
fn state_matrix_blocks() {
    let a = assemble_state_matrix(&frame([0.0, 0.0]));
    assert_eq!(a.view((2, 0), (2, 2)), dmatrix![-2.0, 1.0; 1.0, -1.0]);
    assert_eq!(a.view((2, 2), (2, 2)), DMatrix::<f64>::zeros(2, 2));
    let f = ShearFrame::new([2.0, 0.5], [3.0, 1.5], [0.3, 0.7]).unwrap();
    let tr = assemble_state_matrix(&f).trace();
    assert!((tr - (-(0.3 + 0.7) / 2.0 - 0.7 / 0.5)).abs() < 1e-15);
}

#[test]
fn simulation_matches_runge_kutta() {
    let f = ShearFrame::new([1.3, 0.8], [2.0, 1.1], [0.15, 0.05]).unwrap();
    let u0 = [0.2, 1.0, -0.3, 0.1];
    let probes: Vec<f64> = (1..=20).map(|i| 0.75 * i as f64).collect();
    let sim = simulate(&f, &u0, &probes).unwrap();
    let a = assemble_state_matrix(&f);
    let u0v = DVector::from_column_slice(&u0);
    for (i, t) in probes.iter().enumerate() {
        let r = rk45(&a, &u0v, *t);
        for j in 0..4 {
            assert!((sim[(i, j)] - r[j]).abs() < 1e-8, "t={t} j={j}");
        }
    }
    // irregular times go through the per-time path
    let irregular = [0.0, 0.4, 3.3, 7.0];
    let s2 = simulate(&f, &u0, &irregular).unwrap();
    assert_eq!(s2.row(0).iter().copied().collect::<Vec<_>>(), u0.to_vec());
    for (i, t) in irregular.iter().enumerate().skip(1) {
        let r = rk45(&a, &u0v, *t);
        assert!((s2.row(i).transpose() - r).amax() < 1e-8);
    }
}

#[test]
fn undamped_normal_mode_keeps_amplitude() {
    // slowest undamped normal mode
    let kmat: DMatrix<f64> = dmatrix![-2.0, 1.0; 1.0, -1.0];
    let eig = nalgebra::SymmetricEigen::new(kmat);
    let (idx, _) = eig.eigenvalues.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let omega = (-eig.eigenvalues[idx]).sqrt();
    let v = eig.eigenvectors.column(idx);
    let u0 = [v[0], v[1], 0.0, 0.0];
    let period = 2.0 * std::f64::consts::PI / omega;
    let times: Vec<f64> = (0..=200).map(|i| period * i as f64 / 200.0).collect();
    let s = simulate(&frame([0.0, 0.0]), &u0, &times).unwrap();
    let peak = (0..times.len()).map(|i| s[(i, 0)].abs()).fold(0.0, f64::max);
    assert!((peak - v[0].abs()).abs() < 1e-8);
    assert!((s[(200, 0)] - v[0]).abs() < 1e-8);
}

#[test]
fn linear_in_initial_state() {
    let f = frame([0.1, 0.2]);
    let times: Vec<f64> = (0..15).map(|i| i as f64).collect();
    let (a, b) = ([1.0, 0.0, 0.5, 0.0], [0.0, -1.0, 0.0, 2.0]);
    let sum = [1.0, -1.0, 0.5, 2.0];
    let d = simulate(&f, &sum, &times).unwrap() - simulate(&f, &a, &times).unwrap() - simulate(&f, &b, &times).unwrap();
    assert!(d.amax() < 1e-10);
}

#[test]
fn damped_energy_decays() {
    let f = frame([0.1, 0.15]);
    let times: Vec<f64> = (0..600).map(|i| 0.05 * i as f64).collect();
    let s = simulate(&f, &[0.0, 1.0, 0.0, 0.0], &times).unwrap();
    let e: Vec<f64> = (0..times.len()).map(|i| f.energy(s.row(i).transpose().as_slice())).collect();
    for w in e.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
}

#[test]
fn observations_reproducible_and_noise_calibrated() {
    let f = frame([0.1, 0.15]);
    let a = generate_observations(&f, [0.0, 1.0, 0.0, 0.0], 40, 30.0, 0.05, 3).unwrap();
    assert_eq!(a, generate_observations(&f, [0.0, 1.0, 0.0, 0.0], 40, 30.0, 0.05, 3).unwrap());
    assert_eq!(a.times[39], 30.0);
    let clean = generate_observations(&f, [0.0, 1.0, 0.0, 0.0], 40, 30.0, 0.0, 3).unwrap();
    let s = simulate(&f, &[0.0, 1.0, 0.0, 0.0], &clean.times).unwrap();
    assert!((0..40).all(|i| clean.values[i] == s[(i, 0)]));

    let big = generate_observations(&f, [0.0, 1.0, 0.0, 0.0], 10_000, 30.0, 0.05, 9).unwrap();
    let s = simulate(&f, &[0.0, 1.0, 0.0, 0.0], &big.times).unwrap();
    let r: Vec<f64> = (0..10_000).map(|i| big.values[i] - s[(i, 0)]).collect();
    let m = r.iter().sum::<f64>() / r.len() as f64;
    let var = r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (r.len() - 1) as f64;
    assert!((var / 0.0025 - 1.0).abs() < 0.05);
}

#[test]
fn observation_files_round_trip() {
    let obs = ExemplarScenario::default().observations().unwrap();
    let back = ObservationSet::from_parts(&obs.to_csv(), &obs.sidecar_json()).unwrap();
    assert_eq!(back, obs);
    assert!(obs.to_csv().starts_with("t,y\n"));
    assert!(ObservationSet::from_parts("x,y\n1,2\n", &obs.sidecar_json()).is_err());
}

#[test]
fn noiseless_truth_is_grid_maximum() {
    let scen = ExemplarScenario { sigma: 0.0, true_damping: [0.1, 0.15], stiffness: [1.0, 1.0], ..Default::default() };
    let mut obs = scen.observations().unwrap();
    obs.sigma = 0.05;
    let t = damping_log_likelihood(&obs, scen.search_box().unwrap()).unwrap();
    let truth = t.eval_log_density(&[0.1, 0.15]).unwrap();
    assert_eq!(truth, 0.0);
    let n = 64;
    for i in 0..n {
        for j in 0..n {
            let c = [0.01 + 0.99 * i as f64 / 63.0, 0.01 + 0.99 * j as f64 / 63.0];
            assert!(t.eval_log_density(&c).unwrap() <= truth);
        }
    }
}

#[test]
fn nonpositive_damping_is_outside_support() {
    let obs = ExemplarScenario::default().observations().unwrap();
    let lik = DampingLikelihood::new(obs).unwrap();
    assert_eq!(lik.log_density(&[0.0, 0.3]), f64::NEG_INFINITY);
    assert_eq!(lik.log_density(&[0.3, -1.0]), f64::NEG_INFINITY);
    assert!(damping_log_likelihood(lik.observations(), SearchBox::cube(2, 0.0, 1.0).unwrap()).is_err());
}

#[test]
fn sigma_rescaling_keeps_argmax() {
    let obs = ExemplarScenario::default().observations().unwrap();
    let mut wide = obs.clone();
    wide.sigma *= 2.0;
    let b = ExemplarScenario::default().search_box().unwrap();
    let m1 = grid_mode_census(&damping_log_likelihood(&obs, b.clone()).unwrap(), 32).unwrap();
    let m2 = grid_mode_census(&damping_log_likelihood(&wide, b).unwrap(), 32).unwrap();
    assert_eq!((m1[0].0, m1[0].1), (m2[0].0, m2[0].1));
}

#[test]
fn default_scenario_is_bimodal() {
    let t = ExemplarScenario::default().target().unwrap();
    let modes = grid_mode_census(&t, 64).unwrap();
    assert!(modes.len() >= 2, "{modes:?}");
}

#[test]
fn sharper_noise_sharpens_peak() {
    let base = ExemplarScenario { n_obs: 60, ..Default::default() };
    let half = ExemplarScenario { sigma: base.sigma / 2.0, ..base.clone() };
    let t1 = base.target().unwrap();
    let t2 = half.target().unwrap();
    let cfg = crate::gola::GolaConfig { gradient_tol: 1e-3, n_starts: Some(16), ..Default::default() };
    let m = crate::gola::multistart_minimize(&t1, &cfg).unwrap()[0].location.clone();
    let h1 = t1.eval_hessian(&m).unwrap();
    let h2 = t2.eval_hessian(&m).unwrap();
    for v in [dvector![1.0, 0.0], dvector![0.0, 1.0], dvector![0.6, -0.8], dvector![0.3, 0.9]] {
        assert!((v.transpose() * &h2 * &v)[0] > (v.transpose() * &h1 * &v)[0]);
    }
}

#[test]
fn pushforward_of_point_mass() {
    let f = frame([0.1, 0.15]);
    let g = GaussianComponent::from_covariance(dvector![0.1, 0.15], &(DMatrix::identity(2, 2) * 1e-16)).unwrap();
    let times: Vec<f64> = (0..=30).map(|i| i as f64).collect();
    let s = pushforward(&MixtureModel::single(g), &f, [0.0, 1.0, 0.0, 0.0], &times, 200, 1).unwrap();
    let exact = simulate(&f, &[0.0, 1.0, 0.0, 0.0], &times).unwrap();
    for i in 0..times.len() {
        for fl in 0..2 {
            assert!((s.mean[fl][i] - exact[(i, fl)]).abs() < 1e-4);
            assert!(s.half_width(fl, i) < 1e-4);
        }
    }
    assert_eq!(s.half_width(0, 0), 0.0);
    assert_eq!(s.half_width(1, 0), 0.0);
    assert!(s.to_csv().starts_with("time,floor,mean,lo95,hi95\n0,1,"));
    assert_eq!(s.rejections, 0);
}

#[test]
fn pushforward_flags_heavy_rejection() {
    let g = GaussianComponent::from_covariance(dvector![-0.05, 0.2], &(DMatrix::identity(2, 2) * 0.01)).unwrap();
    let s = pushforward(&MixtureModel::single(g), &frame([0.1, 0.1]), [0.0, 1.0, 0.0, 0.0], &[0.0, 1.0], 200, 2)
        .unwrap();
    assert!(s.high_rejection);
    assert!(s.rejections > 200);
}
