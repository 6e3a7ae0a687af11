//! Distributed estimation of freeway densities over overlapping sections.
//!
//! The crate covers the spatial partition and its one-hop message exchange,
//! the estimators (local KF, DLKCF with and without consensus, central KF
//! and the cross-covariance-tracking variant) and the evaluation metrics.

mod central;
pub mod consensus;
mod distributed;
mod error;
mod exchange;
pub mod kf;
pub mod metrics;
mod optimal;
mod partition;
mod sensors;

pub use central::{CentralKf, CentralModel};
pub use consensus::GammaRule;
pub use distributed::{AgentModel, AgentState, CovarianceModel, DistributedFilter, FilterConfig, LinkState, StepInput, Variant};
pub use error::FilterError;
pub use exchange::{DropPolicy, Envelope, ExchangePacket, Network, Reading};
pub use kf::{kf_correct, kf_predict, Correction, Gaussian};
pub use optimal::{CrossCovariancePack, OptimalDlkcf, OptimalInput};
pub use partition::{PartitionLayout, Projection, Section};
pub use sensors::{Sensor, SensorLayout, SensorPlan, Sharing};
