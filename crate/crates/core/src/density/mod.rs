//! Target densities: the unnormalized log-posterior abstraction optimized by
//! the pipeline, Gaussian components and mixtures, and sinh-arcsinh test
//! posteriors.

mod gaussian;
mod mixture;
mod sinh_arcsinh;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::Rng;

pub use gaussian::GaussianComponent;
pub use mixture::{MixtureJson, MixtureModel};
pub use sinh_arcsinh::{make_sinh_arcsinh_mixture, SinhArcsinhMixture, SinhArcsinhSpec};

/// A log-density over `R^d`, possibly unnormalized.
///
/// Implementations return `-inf` for points outside their support. Analytic
/// derivatives are optional; [`UnnormalizedTarget`] falls back to finite
/// differences when they are absent.
pub trait LogDensity: Send + Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, z: &[f64]) -> f64;

    /// Analytic gradient of the log density.
    fn gradient(&self, _z: &[f64]) -> Option<DVector<f64>> {
        None
    }

    /// Analytic Hessian of the *negative* log density.
    fn neg_log_hessian(&self, _z: &[f64]) -> Option<DMatrix<f64>> {
        None
    }
}

/// A normalized density that can also draw samples.
pub trait SampleableDensity: Send + Sync {
    fn dim(&self) -> usize;
    fn log_pdf(&self, z: &[f64]) -> f64;
    fn sample(&self, n: usize, rng: &mut Rng) -> Vec<DVector<f64>>;
}

/// Axis-aligned box `[lower_i, upper_i]` used to seed and confine global
/// search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::InvalidArgument("search box has no coordinates".into()));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "search box coordinate {i} needs finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval `[lower, upper]` in every coordinate.
    pub fn cube(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn clamp(&self, z: &mut DVector<f64>) {
        for (i, v) in z.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Affine image of a point of the unit cube.
    pub fn from_unit(&self, u: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            u.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .map(|(t, (lo, hi))| lo + t * (hi - lo)),
        )
    }
}

/// An unnormalized log-posterior `log φ` together with the box searched for
/// its modes.
#[derive(Clone)]
pub struct UnnormalizedTarget {
    density: Arc<dyn LogDensity>,
    search_box: SearchBox,
}

impl fmt::Debug for UnnormalizedTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UnnormalizedTarget")
            .field("dim", &self.dim())
            .field("search_box", &self.search_box)
            .finish()
    }
}

impl UnnormalizedTarget {
    pub fn new(density: Arc<dyn LogDensity>, search_box: SearchBox) -> Result<Self> {
        check_dim(density.dim(), search_box.dim())?;
        Ok(Self {
            density,
            search_box,
        })
    }

    /// Target from a bare log-density closure (derivatives by finite differences).
    pub fn from_fn<F>(dim: usize, log_phi: F, search_box: SearchBox) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(Arc::new(FnDensity::new(dim, log_phi)), search_box)
    }

    pub fn dim(&self) -> usize {
        self.density.dim()
    }

    pub fn search_box(&self) -> &SearchBox {
        &self.search_box
    }

    pub fn density(&self) -> &Arc<dyn LogDensity> {
        &self.density
    }

    pub fn with_search_box(&self, search_box: SearchBox) -> Result<Self> {
        Self::new(self.density.clone(), search_box)
    }

    /// `log φ(z)`; `-inf` marks points outside the support.
    pub fn eval_log_density(&self, z: &[f64]) -> Result<f64> {
        check_dim(self.dim(), z.len())?;
        Ok(self.density.log_density(z))
    }

    /// `∇ log φ(z)`, analytic when available, otherwise central differences.
    pub fn eval_gradient(&self, z: &[f64]) -> Result<DVector<f64>> {
        check_dim(self.dim(), z.len())?;
        match self.density.gradient(z) {
            Some(g) => Ok(g),
            None => self.fd_gradient(z),
        }
    }

    /// Central-difference gradient with step `cbrt(eps) * max(1, |z_i|)`.
    pub fn fd_gradient(&self, z: &[f64]) -> Result<DVector<f64>> {
        check_dim(self.dim(), z.len())?;
        let h0 = f64::EPSILON.cbrt();
        let mut x = z.to_vec();
        let mut g = DVector::zeros(z.len());
        for i in 0..z.len() {
            let h = h0 * z[i].abs().max(1.0);
            x[i] = z[i] + h;
            let up = self.finite_at(&x)?;
            x[i] = z[i] - h;
            let down = self.finite_at(&x)?;
            x[i] = z[i];
            g[i] = (up - down) / (2.0 * h);
        }
        Ok(g)
    }

    /// Hessian of `-log φ`, symmetrized.
    ///
    /// Uses the analytic Hessian when supplied; otherwise central differences
    /// of the analytic gradient when one exists, or second differences of
    /// `log φ` with step `eps^(1/4) * max(1, |z_i|)`.
    pub fn eval_hessian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), z.len())?;
        let h = match self.density.neg_log_hessian(z) {
            Some(h) => h,
            None if self.density.gradient(z).is_some() => self.fd_hessian_from_gradient(z)?,
            None => self.fd_hessian(z)?,
        };
        Ok(symmetrize(h))
    }

    /// Second-difference Hessian of `-log φ` from log-density values only.
    pub fn fd_hessian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        let d = z.len();
        let h0 = f64::EPSILON.powf(0.25);
        let steps: Vec<f64> = z.iter().map(|v| h0 * v.abs().max(1.0)).collect();
        let f0 = -self.finite_at(z)?;
        let mut x = z.to_vec();
        let mut out = DMatrix::zeros(d, d);
        for i in 0..d {
            let hi = steps[i];
            x[i] = z[i] + hi;
            let fp = -self.finite_at(&x)?;
            x[i] = z[i] - hi;
            let fm = -self.finite_at(&x)?;
            x[i] = z[i];
            out[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
            for j in 0..i {
                let hj = steps[j];
                let mut corner = |si: f64, sj: f64| -> Result<f64> {
                    x[i] = z[i] + si * hi;
                    x[j] = z[j] + sj * hj;
                    let v = -self.finite_at(&x)?;
                    x[i] = z[i];
                    x[j] = z[j];
                    Ok(v)
                };
                let v = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)?
                    + corner(-1.0, -1.0)?)
                    / (4.0 * hi * hj);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(out)
    }

    fn fd_hessian_from_gradient(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        let d = z.len();
        let h0 = f64::EPSILON.cbrt();
        let mut x = z.to_vec();
        let mut out = DMatrix::zeros(d, d);
        for j in 0..d {
            let h = h0 * z[j].abs().max(1.0);
            x[j] = z[j] + h;
            let up = self.gradient_at(&x)?;
            x[j] = z[j] - h;
            let down = self.gradient_at(&x)?;
            x[j] = z[j];
            let col = (down - up) / (2.0 * h);
            out.set_column(j, &col);
        }
        Ok(out)
    }

    fn gradient_at(&self, x: &[f64]) -> Result<DVector<f64>> {
        match self.density.gradient(x) {
            Some(g) if g.iter().all(|v| v.is_finite()) => Ok(g),
            _ => Err(Error::Derivative { point: x.to_vec() }),
        }
    }

    fn finite_at(&self, x: &[f64]) -> Result<f64> {
        let v = self.density.log_density(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Derivative { point: x.to_vec() })
        }
    }
}

pub(crate) fn symmetrize(h: DMatrix<f64>) -> DMatrix<f64> {
    let t = h.transpose();
    (h + t) * 0.5
}

type LogFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> DVector<f64> + Send + Sync;
type HessFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// Log density given by closures.
pub struct FnDensity {
    dim: usize,
    log_phi: Box<LogFn>,
    gradient: Option<Box<GradFn>>,
    hessian: Option<Box<HessFn>>,
}

impl FnDensity {
    pub fn new<F>(dim: usize, log_phi: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            dim,
            log_phi: Box::new(log_phi),
            gradient: None,
            hessian: None,
        }
    }

    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    {
        self.gradient = Some(Box::new(gradient));
        self
    }

    /// `hessian` must return the Hessian of the negative log density.
    pub fn with_neg_log_hessian<H>(mut self, hessian: H) -> Self
    where
        H: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.hessian = Some(Box::new(hessian));
        self
    }
}

impl LogDensity for FnDensity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        (self.log_phi)(z)
    }

    fn gradient(&self, z: &[f64]) -> Option<DVector<f64>> {
        self.gradient.as_ref().map(|g| g(z))
    }

    fn neg_log_hessian(&self, z: &[f64]) -> Option<DMatrix<f64>> {
        self.hessian.as_ref().map(|h| h(z))
    }
}

/// Shifted log density `log φ(z) + log_scale`, i.e. `φ` multiplied by
/// `exp(log_scale)`.
pub struct Scaled<D> {
    pub inner: D,
    pub log_scale: f64,
}

impl<D: LogDensity> LogDensity for Scaled<D> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        self.inner.log_density(z) + self.log_scale
    }

    fn gradient(&self, z: &[f64]) -> Option<DVector<f64>> {
        self.inner.gradient(z)
    }

    fn neg_log_hessian(&self, z: &[f64]) -> Option<DMatrix<f64>> {
        self.inner.neg_log_hessian(z)
    }
}

/// `log Σ exp(x_i)`, skipping `-inf` entries; `-inf` when all are.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let s: f64 = xs
        .iter()
        .filter(|v| **v > f64::NEG_INFINITY)
        .map(|v| (v - max).exp())
        .sum();
    max + s.ln()
}
