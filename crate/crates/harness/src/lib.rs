//! Experiment harness for the distributed traffic density estimator.
//!
//! A [`Scenario`] describes the ground-truth road, the partition, the
//! sensors and the estimators to run. The harness generates truth and
//! measurements, drives the filters step by step, evaluates the metrics and
//! optional bound monitors, and writes the results as CSV and JSON.

pub mod bench;
pub mod emit;
mod error;
pub mod run;
pub mod scenario;
pub mod studies;

pub use error::HarnessError;
pub use run::{prepare, run_experiment, run_filter, RunInputs, RunRecord, Timings};
pub use scenario::{FilterKind, Scenario, SCENARIO_SCHEMA};
