//! Dense numerical kernels shared by the pipeline stages.

mod cholesky;
mod expm;
mod sobol;
mod sobol_table;
mod special;

pub use cholesky::{cholesky_spd, mahalanobis_distance, SpdMatrix, JITTER_LADDER};
pub use expm::matrix_exponential;
pub use sobol::{sobol_points, SobolSequence, MAX_SOBOL_DIM};
pub use special::{chi_square_survival, regularized_gamma_q};
