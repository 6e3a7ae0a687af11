use thiserror::Error;

/// Errors raised by partitioning, filtering and metric evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    /// Layout arithmetic or section geometry is inconsistent.
    #[error("invalid layout: {0}")]
    Layout(String),
    /// Sensor placement is inconsistent with the layout.
    #[error("invalid sensor layout: {0}")]
    Sensors(String),
    /// A projection or packet was requested between sections that are not one-hop neighbors.
    #[error("sections {0} and {1} are not neighbors")]
    NotNeighbor(usize, usize),
    /// Vector or matrix dimensions disagree.
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    /// A matrix that must be positive definite is not.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    /// Covariance growth exceeded the configured guard.
    #[error("covariance norm {norm:e} exceeded the guard at step {k}")]
    Overflow { k: usize, norm: f64 },
    /// Invalid configuration value.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Error from the switching mode model.
    #[error(transparent)]
    Smm(#[from] smm::SmmError),
    /// Error from the traffic model.
    #[error(transparent)]
    Ctm(#[from] ctm::CtmError),
}
