//! Mixtures of factorized sinh-arcsinh densities, used as skewed, heavy- or
//! light-tailed multimodal test posteriors.
//!
//! One coordinate is `Y = l + σ sinh((asinh(Z) + s) t)` with `Z ~ N(0, 1)`:
//! `s` controls skewness and `t` tail weight; `s = 0, t = 1` is `N(l, σ²)`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{log_sum_exp, LogDensity, SampleableDensity, SearchBox, UnnormalizedTarget};
use crate::error::{check_dim, Error, Result};
use crate::rng::{seeded, Rng};

/// Per-coordinate parameters of one factorized sinh-arcsinh component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinhArcsinhSpec {
    pub loc: Vec<f64>,
    pub scale: Vec<f64>,
    pub skew: Vec<f64>,
    pub tail: Vec<f64>,
}

impl SinhArcsinhSpec {
    pub fn dim(&self) -> usize {
        self.loc.len()
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidArgument("sinh-arcsinh component has no coordinates".into()));
        }
        check_dim(d, self.scale.len())?;
        check_dim(d, self.skew.len())?;
        check_dim(d, self.tail.len())?;
        for i in 0..d {
            if !(self.scale[i] > 0.0 && self.scale[i].is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "sinh-arcsinh scale must be positive, got {} at coordinate {i}",
                    self.scale[i]
                )));
            }
            if !(self.tail[i] > 0.0 && self.tail[i].is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "sinh-arcsinh tailweight must be positive, got {} at coordinate {i}",
                    self.tail[i]
                )));
            }
            if !(self.loc[i].is_finite() && self.skew[i].is_finite()) {
                return Err(Error::InvalidArgument("non-finite sinh-arcsinh parameter".into()));
            }
        }
        Ok(())
    }

    /// Log density and its derivative for coordinate `i` at `y`.
    fn coord_log_pdf(&self, i: usize, y: f64) -> (f64, f64) {
        let (l, sd, s, t) = (self.loc[i], self.scale[i], self.skew[i], self.tail[i]);
        let u = (y - l) / sd;
        let one_u2 = 1.0 + u * u;
        let w = u.asinh() / t - s;
        let z = w.sinh();
        let log_cosh = w.abs() + (-2.0 * w.abs()).exp().ln_1p() - std::f64::consts::LN_2;
        let lp = -0.5 * (2.0 * PI).ln() - 0.5 * z * z + log_cosh
            - t.ln()
            - sd.ln()
            - 0.5 * one_u2.ln();
        let dw_du = 1.0 / (t * one_u2.sqrt());
        let dlp_du = (-z * w.cosh() + w.tanh()) * dw_du - u / one_u2;
        (lp, dlp_du / sd)
    }

    fn log_pdf_and_grad(&self, y: &[f64]) -> (f64, DVector<f64>) {
        let mut total = 0.0;
        let mut grad = DVector::zeros(y.len());
        for (i, &yi) in y.iter().enumerate() {
            let (lp, g) = self.coord_log_pdf(i, yi);
            total += lp;
            grad[i] = g;
        }
        (total, grad)
    }

    /// Transform of a standard-normal draw.
    pub fn transform(&self, i: usize, z: f64) -> f64 {
        self.loc[i] + self.scale[i] * ((z.asinh() + self.skew[i]) * self.tail[i]).sinh()
    }
}

/// Weighted mixture of factorized sinh-arcsinh components. Normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinhArcsinhMixture {
    components: Vec<SinhArcsinhSpec>,
    weights: Vec<f64>,
}

impl SinhArcsinhMixture {
    pub fn new(components: Vec<SinhArcsinhSpec>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("need at least one component".into()));
        }
        check_dim(components.len(), weights.len())?;
        let d = components[0].dim();
        for c in &components {
            c.validate()?;
            check_dim(d, c.dim())?;
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(
                "component weights must lie on the simplex".into(),
            ));
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(Self {
            components,
            weights,
        })
    }

    /// Randomized two-component target: component locations near `-2` and
    /// `+2` in every coordinate, scales in `[0.5, 1]`, skews in
    /// `[-0.6, 0.6]`, tailweights in `[0.8, 1.2]`, weights in `[0.35, 0.65]`.
    pub fn random_two_mode(dim: usize, seed: u64) -> Result<Self> {
        let mut rng = seeded(seed, 0x5a5);
        let mut comps = Vec::with_capacity(2);
        for centre in [-2.0, 2.0] {
            let mut spec = SinhArcsinhSpec {
                loc: Vec::with_capacity(dim),
                scale: Vec::with_capacity(dim),
                skew: Vec::with_capacity(dim),
                tail: Vec::with_capacity(dim),
            };
            for _ in 0..dim {
                spec.loc.push(centre + rng.random_range(-0.5..0.5));
                spec.scale.push(rng.random_range(0.5..1.0));
                spec.skew.push(rng.random_range(-0.6..0.6));
                spec.tail.push(rng.random_range(0.8..1.2));
            }
            comps.push(spec);
        }
        let w0: f64 = rng.random_range(0.35..0.65);
        Self::new(comps, vec![w0, 1.0 - w0])
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn components(&self) -> &[SinhArcsinhSpec] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Box covering every component's standard-normal ±4 quantiles, padded by
    /// one scale unit.
    pub fn default_search_box(&self) -> SearchBox {
        let d = self.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for c in &self.components {
            for i in 0..d {
                lo[i] = lo[i].min(c.transform(i, -4.0) - c.scale[i]);
                hi[i] = hi[i].max(c.transform(i, 4.0) + c.scale[i]);
            }
        }
        SearchBox::new(lo, hi).expect("quantiles are ordered")
    }

    pub fn to_target(&self) -> UnnormalizedTarget {
        UnnormalizedTarget::new(Arc::new(self.clone()), self.default_search_box())
            .expect("box matches dimension")
    }
}

impl LogDensity for SinhArcsinhMixture {
    fn dim(&self) -> usize {
        SinhArcsinhMixture::dim(self)
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .zip(&self.weights)
            .map(|(c, &w)| {
                if w > 0.0 {
                    w.ln() + c.log_pdf_and_grad(z).0
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        log_sum_exp(&terms)
    }

    fn gradient(&self, z: &[f64]) -> Option<DVector<f64>> {
        let parts: Vec<(f64, DVector<f64>)> = self
            .components
            .iter()
            .zip(&self.weights)
            .map(|(c, &w)| {
                let (lp, g) = c.log_pdf_and_grad(z);
                (if w > 0.0 { w.ln() + lp } else { f64::NEG_INFINITY }, g)
            })
            .collect();
        let logs: Vec<f64> = parts.iter().map(|p| p.0).collect();
        let total = log_sum_exp(&logs);
        let mut grad = DVector::zeros(z.len());
        for (lp, g) in parts {
            let r = (lp - total).exp();
            if r > 0.0 {
                grad += g * r;
            }
        }
        Some(grad)
    }
}

impl SampleableDensity for SinhArcsinhMixture {
    fn dim(&self) -> usize {
        SinhArcsinhMixture::dim(self)
    }

    fn log_pdf(&self, z: &[f64]) -> f64 {
        self.log_density(z)
    }

    fn sample(&self, n: usize, rng: &mut Rng) -> Vec<DVector<f64>> {
        let picker = WeightedIndex::new(&self.weights).expect("validated weights");
        let d = self.dim();
        (0..n)
            .map(|_| {
                let c = &self.components[picker.sample(rng)];
                DVector::from_iterator(
                    d,
                    (0..d).map(|i| {
                        let z: f64 = rng.sample(StandardNormal);
                        c.transform(i, z)
                    }),
                )
            })
            .collect()
    }
}

/// Target whose `log φ` is the log of the sinh-arcsinh mixture, with the
/// analytic gradient assembled coordinate-wise.
pub fn make_sinh_arcsinh_mixture(
    specs: Vec<SinhArcsinhSpec>,
    weights: Vec<f64>,
) -> Result<UnnormalizedTarget> {
    Ok(SinhArcsinhMixture::new(specs, weights)?.to_target())
}
