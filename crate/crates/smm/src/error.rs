use thiserror::Error;

/// Errors raised by matrix construction and analysis.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmmError {
    /// A mode/transition-index pair is not legal for the section size.
    #[error("illegal mode {mode} for n = {n}: {reason}")]
    IllegalMode { mode: String, n: usize, reason: String },
    /// Size parameter out of range.
    #[error("invalid size: {0}")]
    InvalidSize(String),
    /// Vector or matrix dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    /// A transition matrix in a product is singular.
    #[error("singular transition matrix at position {0}")]
    Singular(usize),
    /// Measurement noise covariance is not invertible.
    #[error("measurement covariance at position {0} is not invertible")]
    SingularNoise(usize),
    /// Operation requires an unobservable mode.
    #[error("mode {0} is observable; subsystem decomposition needs FC1 or FC2")]
    Observable(String),
    /// Parameters from the traffic model are invalid.
    #[error(transparent)]
    Ctm(#[from] ctm::CtmError),
}
