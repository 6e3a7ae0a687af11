//! Switching mode model (SMM) of a freeway section.
//!
//! A section of `n` cells evolves as `ρ' = A·ρ + B^ρ·1·ρ_m + B^q·1·q_m`
//! where the matrices depend on one of five modes (FF, CC, CF, FC1, FC2)
//! and, for the mixed modes, a transition index `s`. This crate builds the
//! matrices, infers the mode from boundary data and analyses observability.

mod analysis;
mod decompose;
mod error;
mod infer;
mod linearize;
mod matrices;
mod mode;

pub use analysis::{boundary_output, controllability_matrix, information_matrix, numeric_rank};
pub use decompose::{boundary_permutation, decompose_subsystems, SubsystemDecomposition};
pub use error::SmmError;
pub use infer::{infer_mode, label_mode, ModeLabel};
pub use linearize::godunov_linearization;
pub use matrices::{
    build_delta, build_delta_hat, build_mode_matrices, build_theta, build_theta_hat, smm_step, Ratios, SmmMatrices,
};
pub use mode::{all_modes, classify_observability, observable_modes, Mode, ModeTag, Observability};
