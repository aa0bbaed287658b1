//! Gaussian-mixture surrogates for multimodal posteriors.
//!
//! The pipeline locates modes of an unnormalized log-posterior by multistart
//! local optimization, fits a Laplace approximation at each, discards
//! duplicate modes with a Mahalanobis test, and fits nonnegative mixture
//! weights by least squares, yielding a mixture and an evidence estimate.
//! The mixture can then seed variational refinement.

pub mod cli;
pub mod density;
pub mod error;
pub mod exemplar;
pub mod gola;
pub mod mathkit;
pub mod metrics;
pub mod rng;
pub mod sensibench;
pub mod vi;

pub use error::{Error, Result};
