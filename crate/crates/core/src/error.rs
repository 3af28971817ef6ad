use thiserror::Error;

/// Errors raised by the phase-noise models, generators and simulators.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The model is being used outside the range where its approximations hold.
    #[error("validity error: {0}")]
    Validity(String),

    /// A parameter set violates a structural invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Numerical procedure failed to reach its tolerance.
    #[error("numerical failure: {message} (estimate {estimate:e}, error bound {error:e}, {evaluations} evaluations)")]
    Numeric {
        message: String,
        estimate: f64,
        error: f64,
        evaluations: usize,
    },

    /// Not enough samples for a statistically meaningful estimate.
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
