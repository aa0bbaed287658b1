use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::mathkit::cholesky_spd;
use crate::rng::Rng;

/// Multivariate normal `N(mean, L Lᵀ)` stored through its lower Cholesky
/// factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianComponent {
    /// `chol` must be lower triangular with a strictly positive diagonal.
    pub fn new(mean: DVector<f64>, chol: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidArgument("zero-dimensional Gaussian".into()));
        }
        check_dim(d, chol.nrows())?;
        check_dim(d, chol.ncols())?;
        for i in 0..d {
            if !(chol[(i, i)] > 0.0 && chol[(i, i)].is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "Cholesky diagonal entry {i} must be positive, got {}",
                    chol[(i, i)]
                )));
            }
            for j in (i + 1)..d {
                if chol[(i, j)] != 0.0 {
                    return Err(Error::InvalidArgument(
                        "Cholesky factor must be lower triangular".into(),
                    ));
                }
            }
        }
        if mean.iter().chain(chol.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite Gaussian parameters".into()));
        }
        let log_det_half: f64 = chol.diagonal().iter().map(|v| v.ln()).sum();
        let log_norm = -0.5 * d as f64 * (2.0 * PI).ln() - log_det_half;
        Ok(Self {
            mean,
            chol,
            log_norm,
        })
    }

    /// Component from a covariance matrix, which must factor without jitter.
    pub fn from_covariance(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let spd = cholesky_spd(cov)?;
        if spd.jitter_applied() > 0.0 {
            return Err(Error::Singular { max_jitter: 0.0 });
        }
        Self::new(mean, spd.into_lower())
    }

    pub fn standard(dim: usize) -> Self {
        Self::new(DVector::zeros(dim), DMatrix::identity(dim, dim))
            .expect("identity factor is valid")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.chol * self.chol.transpose()
    }

    /// `log |Σ|`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// `L⁻¹ (z - mean)`.
    pub fn whiten(&self, z: &[f64]) -> DVector<f64> {
        let diff = DVector::from_iterator(
            self.dim(),
            z.iter().zip(self.mean.iter()).map(|(a, b)| a - b),
        );
        self.chol
            .solve_lower_triangular(&diff)
            .expect("positive diagonal")
    }

    /// `Σ⁻¹ v` via two triangular solves.
    pub fn precision_times(&self, v: &DVector<f64>) -> DVector<f64> {
        let y = self
            .chol
            .solve_lower_triangular(v)
            .expect("positive diagonal");
        self.chol
            .tr_solve_lower_triangular(&y)
            .expect("positive diagonal")
    }

    /// `Σ⁻¹` (formed explicitly; used for Hessians and closed-form overlaps).
    pub fn precision(&self) -> DMatrix<f64> {
        let d = self.dim();
        let linv = self
            .chol
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .expect("positive diagonal");
        linv.transpose() * linv
    }

    pub fn log_pdf(&self, z: &[f64]) -> f64 {
        let w = self.whiten(z);
        self.log_norm - 0.5 * w.norm_squared()
    }

    /// `∇ log N(z)` = `-Σ⁻¹ (z - mean)`.
    pub fn grad_log_pdf(&self, z: &[f64]) -> DVector<f64> {
        let w = self.whiten(z);
        -self
            .chol
            .tr_solve_lower_triangular(&w)
            .expect("positive diagonal")
    }

    pub fn sample_one(&self, rng: &mut Rng) -> DVector<f64> {
        let eps = DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|_| StandardNormal.sample(rng)),
        );
        &self.mean + &self.chol * eps
    }

    /// Image under `x ↦ A x + b`.
    pub fn affine_image(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        let cov = a * self.covariance() * a.transpose();
        let cov = crate::density::symmetrize(cov);
        Self::from_covariance(a * &self.mean + b, &cov)
    }
}
