use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::SampleableDensity;
use crate::error::{check_dim, Error, Result};
use crate::rng::seeded;

use super::{simulate, ShearFrame};

/// Pointwise mean and central 95% band of both floor displacements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardSummary {
    pub times: Vec<f64>,
    /// `mean[floor][i]` for floors 0 and 1.
    pub mean: [Vec<f64>; 2],
    pub lo95: [Vec<f64>; 2],
    pub hi95: [Vec<f64>; 2],
    pub n_samples: usize,
    /// Draws discarded for nonpositive damping.
    pub rejections: usize,
    /// Set when more than half of all draws were rejected.
    pub high_rejection: bool,
}

impl PushforwardSummary {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,floor,mean,lo95,hi95\n");
        for (i, t) in self.times.iter().enumerate() {
            for f in 0..2 {
                let _ = writeln!(s, "{t},{},{},{},{}", f + 1, self.mean[f][i], self.lo95[f][i], self.hi95[f][i]);
            }
        }
        s
    }

    /// Half-width of the band of `floor` at time index `i`.
    pub fn half_width(&self, floor: usize, i: usize) -> f64 {
        0.5 * (self.hi95[floor][i] - self.lo95[floor][i])
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    if i + 1 < sorted.len() {
        sorted[i] + (sorted[i + 1] - sorted[i]) * (pos - i as f64)
    } else {
        sorted[i]
    }
}

/// Propagate damping samples from `posterior` through the frame.
///
/// `frame` supplies masses and stiffnesses; its damping is ignored.
pub fn pushforward(
    posterior: &dyn SampleableDensity,
    frame: &ShearFrame,
    u0: [f64; 4],
    times: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<PushforwardSummary> {
    check_dim(2, posterior.dim())?;
    if n_samples < 100 {
        return Err(Error::InvalidArgument("pushforward needs at least 100 samples".into()));
    }
    let mut rng = seeded(seed, 0);
    let mut accepted = Vec::with_capacity(n_samples);
    let mut rejections = 0usize;
    let max_draws = 100 * n_samples;
    while accepted.len() < n_samples {
        for z in posterior.sample(n_samples - accepted.len(), &mut rng) {
            if z[0] > 0.0 && z[1] > 0.0 {
                accepted.push([z[0], z[1]]);
            } else {
                rejections += 1;
            }
        }
        if accepted.len() + rejections > max_draws {
            return Err(Error::DegenerateOutput(format!(
                "posterior puts almost no mass on positive damping ({rejections} rejections)"
            )));
        }
    }
    let high_rejection = rejections * 2 > rejections + n_samples;
    if high_rejection {
        log::warn!("pushforward rejected {rejections} of {} draws", rejections + n_samples);
    }

    let runs: Vec<nalgebra::DMatrix<f64>> = accepted
        .par_iter()
        .map(|c| simulate(&frame.with_damping(*c), &u0, times))
        .collect::<Result<_>>()?;
    let nt = times.len();
    let mut mean = [vec![0.0; nt], vec![0.0; nt]];
    let mut lo95 = [vec![0.0; nt], vec![0.0; nt]];
    let mut hi95 = [vec![0.0; nt], vec![0.0; nt]];
    for f in 0..2 {
        for i in 0..nt {
            let mut v: Vec<f64> = runs.iter().map(|r| r[(i, f)]).collect();
            mean[f][i] = v.iter().sum::<f64>() / v.len() as f64;
            v.sort_by(f64::total_cmp);
            lo95[f][i] = quantile(&v, 0.025);
            hi95[f][i] = quantile(&v, 0.975);
        }
    }
    Ok(PushforwardSummary {
        times: times.to_vec(),
        mean,
        lo95,
        hi95,
        n_samples,
        rejections,
        high_rejection,
    })
}
