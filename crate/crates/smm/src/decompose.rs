use ctm::{FundamentalDiagram, Grid};
use nalgebra::DMatrix;

use crate::{build_mode_matrices, Mode, SmmError};

/// Split of an unobservable section into its boundary (observable) subsystem
/// and the interior cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemDecomposition {
    /// Permutation with rows `e_1, e_n, e_2, …, e_{n−1}`.
    pub u: DMatrix<f64>,
    /// `U·A·Uᵀ`.
    pub a_check: DMatrix<f64>,
    /// Boundary block (2×2); the identity for FC modes.
    pub a1: DMatrix<f64>,
    /// Coupling from boundary to interior ((n−2)×2).
    pub a21: DMatrix<f64>,
    /// Interior block ((n−2)×(n−2)).
    pub a2: DMatrix<f64>,
}

impl SubsystemDecomposition {
    /// Splits a covariance into the boundary block, the cross block and the
    /// interior block of `U·Γ·Uᵀ`.
    pub fn covariance_blocks(&self, gamma: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let n = self.u.nrows();
        let g = &self.u * gamma * self.u.transpose();
        (
            g.view((0, 0), (2, 2)).into_owned(),
            g.view((0, 2), (2, n - 2)).into_owned(),
            g.view((2, 2), (n - 2, n - 2)).into_owned(),
        )
    }
}

/// Permutation moving cells 1 and n to the front.
pub fn boundary_permutation(n: usize) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(n, n);
    u[(0, 0)] = 1.0;
    u[(1, n - 1)] = 1.0;
    for l in 1..n - 1 {
        u[(l + 1, l)] = 1.0;
    }
    u
}

/// Decomposes an FC-mode transition matrix into its subsystems.
pub fn decompose_subsystems(
    mode: Mode,
    n: usize,
    fd: &FundamentalDiagram,
    grid: &Grid,
) -> Result<SubsystemDecomposition, SmmError> {
    if mode.is_observable() {
        return Err(SmmError::Observable(mode.to_string()));
    }
    let a = build_mode_matrices(mode, n, fd, grid)?.a;
    let u = boundary_permutation(n);
    let a_check = &u * a * u.transpose();
    Ok(SubsystemDecomposition {
        a1: a_check.view((0, 0), (2, 2)).into_owned(),
        a21: a_check.view((2, 0), (n - 2, 2)).into_owned(),
        a2: a_check.view((2, 2), (n - 2, n - 2)).into_owned(),
        a_check,
        u,
    })
}
