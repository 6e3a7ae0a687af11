//! Triangular fundamental diagram and the Godunov-discretized cell
//! transmission model (CTM).
//!
//! The CTM is the nonlinear ground-truth generator of the workspace and the
//! oracle against which the switching mode model is verified.

mod boundary;
mod error;
mod fd;
mod grid;
mod model;
mod simulate;

pub use boundary::{BoundarySignal, BoundarySpec, BoundaryTrace, BoundaryValues};
pub use error::CtmError;
pub use fd::{FdSpec, FundamentalDiagram};
pub use grid::Grid;
pub use model::{ctm_step, flux, godunov_update, DensityProfile};
pub use simulate::{simulate, InitialProfile, Segment, Trajectory, TruthScenario};
