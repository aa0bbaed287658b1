use nalgebra::DMatrix;

use crate::density::{GaussianComponent, UnnormalizedTarget};
use crate::error::{check_dim, Error, Result};
use crate::mathkit::cholesky_spd;

/// Gaussian with covariance `H⁻¹`, `H` the Hessian of `-log φ` at `mode`.
///
/// The Hessian is factored in reversed index order, `H = U Uᵀ` with `U` upper
/// triangular, so that `Σ = U⁻ᵀ U⁻¹` and the lower factor of `Σ` is `U⁻ᵀ`,
/// obtained by one triangular solve.
pub fn laplace_at_mode(target: &UnnormalizedTarget, mode: &[f64]) -> Result<GaussianComponent> {
    check_dim(target.dim(), mode.len())?;
    let h = target.eval_hessian(mode)?;
    let d = h.nrows();
    let rev = |m: &DMatrix<f64>| DMatrix::from_fn(d, d, |i, j| m[(d - 1 - i, d - 1 - j)]);
    let degenerate = || Error::DegenerateMode { mode: mode.to_vec() };
    let spd = cholesky_spd(&rev(&h)).map_err(|e| match e {
        Error::Singular { .. } | Error::InvalidArgument(_) => degenerate(),
        other => other,
    })?;
    let upper = rev(spd.lower());
    let chol_cov = upper
        .transpose()
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or_else(degenerate)?;
    GaussianComponent::new(nalgebra::DVector::from_column_slice(mode), chol_cov)
        .map_err(|_| degenerate())
}
