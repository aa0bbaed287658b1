use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

/// Multipliers of the mean absolute diagonal tried in order until the
/// factorization of `a + jitter * I` succeeds.
pub const JITTER_LADDER: [f64; 6] = [0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2];

const SYMMETRY_RTOL: f64 = 1e-10;

/// A symmetric positive definite matrix together with its lower Cholesky
/// factor and the diagonal jitter that was needed to obtain it.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    chol: DMatrix<f64>,
    jitter: f64,
}

impl SpdMatrix {
    pub fn order(&self) -> usize {
        self.matrix.nrows()
    }

    /// The matrix as supplied (without jitter).
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower-triangular factor `L` with `L Lᵀ = matrix + jitter I`.
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn jitter_applied(&self) -> f64 {
        self.jitter
    }

    pub fn into_lower(self) -> DMatrix<f64> {
        self.chol
    }
}

/// Factor a symmetric matrix, escalating diagonal jitter along
/// [`JITTER_LADDER`] (scaled by the mean absolute diagonal) until the
/// factorization succeeds.
pub fn cholesky_spd(a: &DMatrix<f64>) -> Result<SpdMatrix> {
    let d = a.nrows();
    check_dim(d, a.ncols())?;
    if d == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let norm = a.norm().max(f64::MIN_POSITIVE);
    let asym = (a - a.transpose()).norm();
    if asym > SYMMETRY_RTOL * norm {
        return Err(Error::InvalidArgument(format!(
            "matrix is not symmetric (relative asymmetry {:e})",
            asym / norm
        )));
    }
    let mut scale = a.diagonal().iter().map(|v| v.abs()).sum::<f64>() / d as f64;
    if scale == 0.0 {
        scale = 1.0;
    }
    for &step in JITTER_LADDER.iter() {
        let jitter = step * scale;
        let mut shifted = a.clone();
        for i in 0..d {
            shifted[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(shifted) {
            let l = chol.unpack();
            if l.diagonal().iter().all(|&v| v > 0.0 && v.is_finite()) {
                return Ok(SpdMatrix {
                    matrix: a.clone(),
                    chol: l,
                    jitter,
                });
            }
        }
    }
    Err(Error::Singular {
        max_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1] * scale,
    })
}

/// `sqrt((z - mean)ᵀ Σ⁻¹ (z - mean))` with `Σ = L Lᵀ`, via one forward
/// substitution.
pub fn mahalanobis_distance(
    z: &DVector<f64>,
    mean: &DVector<f64>,
    chol_cov: &DMatrix<f64>,
) -> Result<f64> {
    check_dim(mean.len(), z.len())?;
    check_dim(chol_cov.nrows(), z.len())?;
    let diff = z - mean;
    let white = chol_cov
        .solve_lower_triangular(&diff)
        .ok_or(Error::Singular { max_jitter: 0.0 })?;
    Ok(white.norm())
}
