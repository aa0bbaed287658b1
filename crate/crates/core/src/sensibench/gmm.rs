use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::density::{GaussianComponent, MixtureModel};
use crate::error::{Error, Result};
use crate::metrics::dice_overlap;
use crate::rng::seeded;

/// One draw of the mixture-generator factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmFactors {
    pub d: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub omega: f64,
    pub c: f64,
    pub lambda: f64,
}

impl GmmFactors {
    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() != 5 {
            return Err(Error::InvalidArgument(format!("expected 5 factor values, got {}", x.len())));
        }
        let f = Self { d: x[0].round() as usize, m: x[1].round() as usize, omega: x[2], c: x[3], lambda: x[4] };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m == 0 {
            return Err(Error::InvalidArgument("d and M must be positive".into()));
        }
        if !(self.omega >= 1.0 && self.omega.is_finite()) {
            return Err(Error::InvalidArgument("omega must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.c) {
            return Err(Error::InvalidArgument("c must lie in [0, 1)".into()));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidArgument("lambda must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Unit-scale template positions of `m` means in `R^d`: regular simplex
/// vertices when `m ≤ d + 1`, else a regular polygon in the first two axes.
fn template(d: usize, m: usize) -> Vec<DVector<f64>> {
    if m == 1 {
        return vec![DVector::zeros(d)];
    }
    if m <= d + 1 {
        // Helmert basis of the hyperplane orthogonal to (1, ..., 1) in R^m
        (0..m)
            .map(|i| {
                let mut v = DVector::zeros(d);
                for j in 1..m {
                    let norm = ((j * (j + 1)) as f64).sqrt();
                    v[j - 1] = match i.cmp(&j) {
                        std::cmp::Ordering::Less => 1.0 / norm,
                        std::cmp::Ordering::Equal => -(j as f64) / norm,
                        std::cmp::Ordering::Greater => 0.0,
                    };
                }
                v
            })
            .collect()
    } else {
        (0..m)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                let mut v = DVector::zeros(d);
                v[0] = a.cos();
                v[1] = a.sin();
                v
            })
            .collect()
    }
}

/// Haar-distributed orthogonal matrix.
fn random_rotation(d: usize, rng: &mut crate::rng::Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn max_overlap(comps: &[GaussianComponent]) -> Result<f64> {
    let mut best = 0.0_f64;
    for i in 0..comps.len() {
        for j in 0..i {
            best = best.max(dice_overlap(&comps[i], &comps[j])?);
        }
    }
    Ok(best)
}

/// Test mixture from the five factors.
///
/// Weights decay geometrically by `omega`; every covariance has unit
/// diagonal and off-diagonal `c`; means sit on a randomly rotated template
/// whose scale is bisected until the largest pairwise Dice overlap is
/// `lambda`.
pub fn generate_test_gmm(f: &GmmFactors, seed: u64) -> Result<MixtureModel> {
    f.validate()?;
    let (d, m) = (f.d, f.m);
    if d < 2 && m > 2 {
        return Err(Error::Generation(format!("cannot place {m} separated means in {d} dimension")));
    }
    let mut weights = Vec::with_capacity(m);
    let mut w = 1.0;
    for _ in 0..m {
        weights.push(w);
        w /= f.omega;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let cov = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { f.c });
    let chol = nalgebra::Cholesky::new(cov)
        .ok_or_else(|| Error::Generation(format!("correlation {} is not positive definite", f.c)))?
        .l();

    let mut rng = seeded(seed, 0);
    let rot = random_rotation(d, &mut rng);
    let dirs: Vec<DVector<f64>> = template(d, m).into_iter().map(|v| &rot * v).collect();
    let build = |scale: f64| -> Result<Vec<GaussianComponent>> {
        dirs.iter().map(|v| GaussianComponent::new(v * scale, chol.clone())).collect()
    };
    if m == 1 {
        return MixtureModel::new(build(0.0)?, weights);
    }

    let mut hi = 1.0;
    while max_overlap(&build(hi)?)? > f.lambda {
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::Generation(format!("could not bracket overlap {}", f.lambda)));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if max_overlap(&build(mid)?)? > f.lambda {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    MixtureModel::new(build(hi)?, weights)
}
