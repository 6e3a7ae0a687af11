use serde::{Deserialize, Serialize};

use crate::{CtmError, FundamentalDiagram};

/// Uniform space-time discretization of a road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Cell length.
    pub dx: f64,
    /// Time step.
    pub dt: f64,
    /// Number of cells.
    pub n_cells: usize,
}

impl Grid {
    /// Builds a grid, rejecting non-positive steps and fewer than two cells.
    pub fn new(dx: f64, dt: f64, n_cells: usize) -> Result<Self, CtmError> {
        let grid = Self { dx, dt, n_cells };
        grid.validate()?;
        Ok(grid)
    }

    /// Checks the structural invariants (not the CFL condition).
    pub fn validate(&self) -> Result<(), CtmError> {
        if !(self.dx.is_finite() && self.dx > 0.0 && self.dt.is_finite() && self.dt > 0.0) {
            return Err(CtmError::InvalidGrid(format!("dx = {}, dt = {} must be positive", self.dx, self.dt)));
        }
        if self.n_cells < 2 {
            return Err(CtmError::InvalidGrid(format!("need at least 2 cells, got {}", self.n_cells)));
        }
        Ok(())
    }

    /// The ratio `dt/dx`.
    pub fn ratio(&self) -> f64 {
        self.dt / self.dx
    }

    /// Returns a copy with a different cell count.
    pub fn with_cells(&self, n_cells: usize) -> Self {
        Self { n_cells, ..*self }
    }

    /// Checks `v_m·dt/dx ≤ 1` and `w·dt/dx ≤ 1`.
    pub fn check_cfl(&self, fd: &FundamentalDiagram) -> Result<(), CtmError> {
        let tv = fd.v_m * self.ratio();
        if tv > 1.0 {
            return Err(CtmError::Cfl { which: "v_m", value: tv });
        }
        let tw = fd.w * self.ratio();
        if tw > 1.0 {
            return Err(CtmError::Cfl { which: "w", value: tw });
        }
        Ok(())
    }
}
