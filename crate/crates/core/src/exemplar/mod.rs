//! Two-story shear frame: state-space simulation, synthetic displacement
//! data, the damping log-likelihood and pushforward summaries.

mod pushforward;

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::density::{LogDensity, SearchBox, UnnormalizedTarget};
use crate::error::{check_dim, Error, Result};
use crate::gola::GolaConfig;
use crate::mathkit::matrix_exponential;
use crate::rng::seeded;

pub use pushforward::{pushforward, PushforwardSummary};

/// Masses, inter-story stiffnesses and dampers of a two-story frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShearFrame {
    pub masses: [f64; 2],
    pub stiffness: [f64; 2],
    pub damping: [f64; 2],
}

impl ShearFrame {
    pub fn new(masses: [f64; 2], stiffness: [f64; 2], damping: [f64; 2]) -> Result<Self> {
        let f = Self { masses, stiffness, damping };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: &[f64; 2]| v.iter().all(|x| x.is_finite() && *x > 0.0);
        if !positive(&self.masses) || !positive(&self.stiffness) {
            return Err(Error::InvalidArgument("masses and stiffnesses must be positive".into()));
        }
        if !self.damping.iter().all(|c| c.is_finite() && *c >= 0.0) {
            return Err(Error::InvalidArgument("damping must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn with_damping(&self, damping: [f64; 2]) -> Self {
        Self { damping, ..*self }
    }

    fn coupling(a: [f64; 2]) -> [[f64; 2]; 2] {
        [[a[0] + a[1], -a[1]], [-a[1], a[1]]]
    }

    /// Kinetic plus elastic energy of state `u = (x, ẋ)`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let k = Self::coupling(self.stiffness);
        let kinetic = 0.5 * (self.masses[0] * u[2] * u[2] + self.masses[1] * u[3] * u[3]);
        let elastic = 0.5 * (k[0][0] * u[0] * u[0] + 2.0 * k[0][1] * u[0] * u[1] + k[1][1] * u[1] * u[1]);
        kinetic + elastic
    }
}

/// `A = [[0, I], [-M⁻¹K, -M⁻¹C]]` for state `(x₁, x₂, ẋ₁, ẋ₂)`.
pub fn assemble_state_matrix(frame: &ShearFrame) -> DMatrix<f64> {
    let k = ShearFrame::coupling(frame.stiffness);
    let c = ShearFrame::coupling(frame.damping);
    let mut a = DMatrix::zeros(4, 4);
    a[(0, 2)] = 1.0;
    a[(1, 3)] = 1.0;
    for i in 0..2 {
        for j in 0..2 {
            a[(2 + i, j)] = -k[i][j] / frame.masses[i];
            a[(2 + i, 2 + j)] = -c[i][j] / frame.masses[i];
        }
    }
    a
}

/// Common spacing of `times` when it is an arithmetic progression.
fn uniform_step(times: &[f64]) -> Option<f64> {
    if times.len() < 2 {
        return None;
    }
    let dt = times[1] - times[0];
    let scale = times.last().unwrap().abs().max(1.0);
    let uniform = dt > 0.0
        && times
            .iter()
            .enumerate()
            .all(|(i, t)| (t - times[0] - i as f64 * dt).abs() <= 1e-12 * scale);
    uniform.then_some(dt)
}

/// States `exp(A tᵢ) u₀` as rows of an `n × 4` matrix.
///
/// Uniformly spaced times reuse one propagator `exp(A Δt)`.
pub fn simulate(frame: &ShearFrame, u0: &[f64], times: &[f64]) -> Result<DMatrix<f64>> {
    check_dim(4, u0.len())?;
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidArgument("simulation times must be finite and nonnegative".into()));
    }
    let a = assemble_state_matrix(frame);
    let u0 = DVector::from_column_slice(u0);
    let mut out = DMatrix::zeros(times.len(), 4);
    match uniform_step(times) {
        Some(dt) => {
            let step = matrix_exponential(&(&a * dt))?;
            let mut u = if times[0] == 0.0 { u0 } else { matrix_exponential(&(&a * times[0]))? * u0 };
            for i in 0..times.len() {
                if i > 0 {
                    u = &step * u;
                }
                out.set_row(i, &u.transpose());
            }
        }
        None => {
            for (i, &t) in times.iter().enumerate() {
                let u = if t == 0.0 { u0.clone() } else { matrix_exponential(&(&a * t))? * &u0 };
                out.set_row(i, &u.transpose());
            }
        }
    }
    Ok(out)
}

/// Noisy first-floor displacements plus everything needed to rebuild the
/// likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSet {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub sigma: f64,
    pub u0: [f64; 4],
    /// State coordinate observed; 0 is the first-floor displacement.
    pub observed_index: usize,
    pub masses: [f64; 2],
    pub stiffness: [f64; 2],
    /// Damping used to synthesize the data, when known.
    pub true_damping: Option<[f64; 2]>,
}

/// Sidecar fields written next to the `t,y` table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationMeta {
    sigma: f64,
    u0: [f64; 4],
    observed_index: usize,
    masses: [f64; 2],
    stiffness: [f64; 2],
    true_damping: Option<[f64; 2]>,
}

impl ObservationSet {
    pub fn validate(&self) -> Result<()> {
        check_dim(self.times.len(), self.values.len())?;
        if self.times.is_empty() || self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("observation times must be strictly increasing".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument("noise sigma must be positive".into()));
        }
        if self.observed_index >= 4 {
            return Err(Error::InvalidArgument("observed index must be below 4".into()));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,y\n");
        for (t, y) in self.times.iter().zip(&self.values) {
            let _ = writeln!(s, "{t},{y}");
        }
        s
    }

    pub fn sidecar_json(&self) -> String {
        let meta = ObservationMeta {
            sigma: self.sigma,
            u0: self.u0,
            observed_index: self.observed_index,
            masses: self.masses,
            stiffness: self.stiffness,
            true_damping: self.true_damping,
        };
        serde_json::to_string_pretty(&meta).expect("sidecar serializes")
    }

    pub fn from_parts(csv: &str, sidecar: &str) -> Result<Self> {
        let meta: ObservationMeta = serde_json::from_str(sidecar)?;
        let mut lines = csv.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("t,y") {
            return Err(Error::InvalidArgument("observation table must start with header 't,y'".into()));
        }
        let (mut times, mut values) = (Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("malformed observation row {}", i + 1)))
            };
            let mut parts = line.split(',');
            times.push(parse(parts.next())?);
            values.push(parse(parts.next())?);
        }
        let obs = Self {
            times,
            values,
            sigma: meta.sigma,
            u0: meta.u0,
            observed_index: meta.observed_index,
            masses: meta.masses,
            stiffness: meta.stiffness,
            true_damping: meta.true_damping,
        };
        obs.validate()?;
        Ok(obs)
    }
}

/// `n_obs` uniform times on `(0, horizon]`, first-floor displacement plus
/// Gaussian noise of standard deviation `sigma`.
pub fn generate_observations(
    frame: &ShearFrame,
    u0: [f64; 4],
    n_obs: usize,
    horizon: f64,
    sigma: f64,
    seed: u64,
) -> Result<ObservationSet> {
    frame.validate()?;
    if n_obs < 2 || !(horizon > 0.0) || !(sigma >= 0.0) {
        return Err(Error::InvalidArgument("need n_obs >= 2, horizon > 0 and sigma >= 0".into()));
    }
    let times: Vec<f64> = (1..=n_obs).map(|i| horizon * i as f64 / n_obs as f64).collect();
    let states = simulate(frame, &u0, &times)?;
    let mut rng = seeded(seed, 0);
    let values = (0..n_obs)
        .map(|i| {
            let noise = if sigma > 0.0 { Normal::new(0.0, sigma).unwrap().sample(&mut rng) } else { 0.0 };
            states[(i, 0)] + noise
        })
        .collect();
    Ok(ObservationSet {
        times,
        values,
        sigma,
        u0,
        observed_index: 0,
        masses: frame.masses,
        stiffness: frame.stiffness,
        true_damping: Some(frame.damping),
    })
}

/// Gaussian log-likelihood of the damping pair, flat prior.
#[derive(Debug, Clone)]
pub struct DampingLikelihood {
    obs: ObservationSet,
}

impl DampingLikelihood {
    pub fn new(obs: ObservationSet) -> Result<Self> {
        obs.validate()?;
        ShearFrame::new(obs.masses, obs.stiffness, [0.0, 0.0])?;
        Ok(Self { obs })
    }

    pub fn observations(&self) -> &ObservationSet {
        &self.obs
    }
}

impl LogDensity for DampingLikelihood {
    fn dim(&self) -> usize {
        2
    }

    /// `-Σ (yᵢ - H u(tᵢ))² / (2σ²)`; `-inf` for nonpositive damping.
    fn log_density(&self, c: &[f64]) -> f64 {
        if c.len() != 2 || !(c[0] > 0.0 && c[1] > 0.0) || !c.iter().all(|v| v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let frame = ShearFrame { masses: self.obs.masses, stiffness: self.obs.stiffness, damping: [c[0], c[1]] };
        let Ok(states) = simulate(&frame, &self.obs.u0, &self.obs.times) else {
            return f64::NEG_INFINITY;
        };
        let h = self.obs.observed_index;
        let ss: f64 = self.obs.values.iter().enumerate().map(|(i, y)| (y - states[(i, h)]).powi(2)).sum();
        -ss / (2.0 * self.obs.sigma * self.obs.sigma)
    }
}

/// Likelihood target over `(c₁, c₂)`, finite-difference derivatives.
pub fn damping_log_likelihood(obs: &ObservationSet, search_box: SearchBox) -> Result<UnnormalizedTarget> {
    if search_box.dim() != 2 || search_box.lower().iter().any(|l| *l <= 0.0) {
        return Err(Error::InvalidArgument("damping search box must lie in the open positive quadrant".into()));
    }
    UnnormalizedTarget::new(Arc::new(DampingLikelihood::new(obs.clone())?), search_box)
}

/// Strict local maxima of `log φ` on an `n × n` node grid over the box, as
/// `(c₁, c₂, log φ)` sorted by height.
pub fn grid_mode_census(target: &UnnormalizedTarget, n: usize) -> Result<Vec<(f64, f64, f64)>> {
    if target.dim() != 2 || n < 3 {
        return Err(Error::InvalidArgument("grid census needs a 2-D target and n >= 3".into()));
    }
    let b = target.search_box();
    let axis = |a: usize, i: usize| b.lower()[a] + (b.upper()[a] - b.lower()[a]) * i as f64 / (n - 1) as f64;
    let vals: Vec<f64> = {
        use rayon::prelude::*;
        (0..n * n)
            .into_par_iter()
            .map(|idx| target.density().log_density(&[axis(0, idx / n), axis(1, idx % n)]))
            .collect()
    };
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = vals[i * n + j];
            let mut is_max = v.is_finite();
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (a, b2) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || a < 0 || b2 < 0 || a >= n as i64 || b2 >= n as i64 {
                        continue;
                    }
                    if vals[a as usize * n + b2 as usize] >= v {
                        is_max = false;
                    }
                }
            }
            if is_max {
                out.push((axis(0, i), axis(1, j), v));
            }
        }
    }
    out.sort_by(|x, y| y.2.total_cmp(&x.2));
    Ok(out)
}

/// Synthetic damping-identification problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExemplarScenario {
    pub masses: [f64; 2],
    pub stiffness: [f64; 2],
    pub true_damping: [f64; 2],
    pub u0: [f64; 4],
    pub horizon: f64,
    pub n_obs: usize,
    pub sigma: f64,
    pub data_seed: u64,
    pub box_lower: [f64; 2],
    pub box_upper: [f64; 2],
}

impl Default for ExemplarScenario {
    /// Stiffnesses `(2, 1)` with true damping `(0.2, 0.4)` make the
    /// first-floor response nearly indistinguishable from that of a second
    /// damping pair near `(0.8, 0.09)`, so the posterior has two modes.
    fn default() -> Self {
        Self {
            masses: [1.0, 1.0],
            stiffness: [2.0, 1.0],
            true_damping: [0.2, 0.4],
            u0: [0.0, 1.0, 0.0, 0.0],
            horizon: 30.0,
            n_obs: 40,
            sigma: 0.01,
            data_seed: 0,
            box_lower: [0.01, 0.01],
            box_upper: [1.0, 1.0],
        }
    }
}

impl ExemplarScenario {
    pub fn frame(&self) -> Result<ShearFrame> {
        ShearFrame::new(self.masses, self.stiffness, self.true_damping)
    }

    pub fn search_box(&self) -> Result<SearchBox> {
        SearchBox::new(self.box_lower.to_vec(), self.box_upper.to_vec())
    }

    pub fn observations(&self) -> Result<ObservationSet> {
        generate_observations(&self.frame()?, self.u0, self.n_obs, self.horizon, self.sigma, self.data_seed)
    }

    pub fn target(&self) -> Result<UnnormalizedTarget> {
        damping_log_likelihood(&self.observations()?, self.search_box()?)
    }

    /// Pipeline settings for this likelihood. Its curvature is of order
    /// `1/σ²`, so finite-difference gradients cannot resolve the generic
    /// `1e-8` stationarity tolerance; `1e-5` pins modes to about `1e-9`.
    pub fn gola_config(&self) -> GolaConfig {
        GolaConfig { gradient_tol: 1e-5, ..GolaConfig::default() }
    }
}

#[cfg(test)]
mod tests;
