use thiserror::Error;

/// Errors raised across the toolkit. Variants map onto the failure modes each
/// pipeline stage can report; the CLI and the C ABI translate them into
/// machine-readable kinds via [`Error::kind`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite log density at {point:?} while evaluating derivatives")]
    Derivative { point: Vec<f64> },

    #[error("matrix is not positive definite even with maximal jitter {max_jitter:e}")]
    Singular { max_jitter: f64 },

    #[error("start point {point:?} has -inf log density")]
    RejectedStart { point: Vec<f64> },

    #[error("no local search converged ({runs} runs)")]
    NoModesFound { runs: usize },

    #[error("degenerate mode at {mode:?}: Hessian singular after regularization")]
    DegenerateMode { mode: Vec<f64> },

    #[error(
        "all target evaluations underflowed in the weight solve; recalibrate the log offset of the target"
    )]
    Scaling,

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("test-mixture generation failed: {0}")]
    Generation(String),

    #[error("degenerate model output: {0}")]
    DegenerateOutput(String),

    #[error("model evaluation failed twice on design row {row}: {message}")]
    ModelFailure { row: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable, machine-readable identifier for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Derivative { .. } => "derivative",
            Error::Singular { .. } => "singular",
            Error::RejectedStart { .. } => "rejected_start",
            Error::NoModesFound { .. } => "no_modes_found",
            Error::DegenerateMode { .. } => "degenerate_mode",
            Error::Scaling => "scaling",
            Error::Unsupported(_) => "unsupported",
            Error::Generation(_) => "generation",
            Error::DegenerateOutput(_) => "degenerate_output",
            Error::ModelFailure { .. } => "model_failure",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
