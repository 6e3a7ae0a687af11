use thiserror::Error;

/// Errors raised while evaluating bounds.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    /// A configuration parameter violates its invariant.
    #[error("invalid bound configuration: {0}")]
    Config(String),
    /// A covariance argument is not symmetric positive definite.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    /// A matrix argument has the wrong size.
    #[error("expected a {expected}x{expected} matrix, got {rows}x{cols}")]
    Dimension { expected: usize, rows: usize, cols: usize },
    /// A rate or amplification factor left its admissible range.
    #[error("degenerate constant {name} = {value}")]
    Degenerate { name: &'static str, value: f64 },
    /// A schedule does not match the supplied covariance snapshots.
    #[error("invalid schedule: {0}")]
    Schedule(String),
    /// Model matrices could not be built.
    #[error(transparent)]
    Smm(#[from] smm::SmmError),
}
