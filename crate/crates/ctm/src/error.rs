use thiserror::Error;

/// Errors raised by the fundamental diagram, grid and CTM operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CtmError {
    /// Fundamental-diagram parameters violate `0 < rho_c < rho_m` or `v_m > 0`.
    #[error("invalid fundamental diagram: {0}")]
    InvalidDiagram(String),
    /// Grid spacing, time step or cell count is not usable.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    /// The Courant-Friedrichs-Lewy condition fails for the given diagram.
    #[error("CFL condition violated: {which}·dt/dx = {value} > 1")]
    Cfl { which: &'static str, value: f64 },
    /// A density profile contains a NaN or negative entry.
    #[error("invalid density at cell {cell}: {value}")]
    InvalidDensity { cell: usize, value: f64 },
    /// Two vectors that must have equal length do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    /// A scenario field is inconsistent.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}
