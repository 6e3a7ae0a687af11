//! Stability and boundedness constants of the distributed estimator.
//!
//! The crate evaluates the covariance bounds of a section switching among
//! observable modes (sequence-extremized and closed-form), the Kalman gain
//! and mean error bounds of unobservable intervals, the convergence rate and
//! residence time of observable intervals, and the error caps of a whole
//! switching schedule. It also provides the runtime monitors that compare
//! filter output against those bounds.

mod analytic;
mod config;
mod engine;
mod error;
mod extremes;
mod linalg;
pub mod monitors;
mod schedule;

pub use analytic::{
    analytic_bounds, rate_constants, residence, sigma_max_sq_bound, AnalyticBounds, GainConstants, RateConstants,
    Residence,
};
pub use config::{BoundConfig, DEFAULT_EXHAUSTIVE_LIMIT, DEFAULT_SAMPLES};
pub use engine::{BoundEngine, BoundReport};
pub use error::BoundsError;
pub use extremes::{extremized_bounds, bounds_from_extremes, sequence_extremes, Coverage, ExtremizedBounds, SequenceExtremes};
pub use linalg::{check_spd, eigen_extremes, spectral_norm};
pub use schedule::{schedule_bounds, Interval, IntervalBound, IntervalSchedule, ScheduleBounds};
