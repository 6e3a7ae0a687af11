use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while loading scenarios, running experiments and writing results.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// A scenario field is invalid or inconsistent with another field.
    #[error("invalid scenario: {0}")]
    Scenario(String),
    /// A filter failed at a given step.
    #[error("filter {filter} failed at step {k}{}: {source}", agent.map(|a| format!(" (agent {a})")).unwrap_or_default())]
    Step { filter: String, k: usize, agent: Option<usize>, source: dlkcf::FilterError },
    /// Filter construction or metric evaluation failed outside the step loop.
    #[error(transparent)]
    Filter(#[from] dlkcf::FilterError),
    /// Ground-truth generation failed.
    #[error(transparent)]
    Ctm(#[from] ctm::CtmError),
    /// Bound evaluation failed.
    #[error(transparent)]
    Bounds(#[from] bounds::BoundsError),
    /// Reading or writing a file failed.
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    /// JSON (de)serialization failed.
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    /// CSV serialization failed.
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}
