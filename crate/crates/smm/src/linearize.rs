use ctm::{FundamentalDiagram, Grid};
use nalgebra::{DMatrix, DVector};

use crate::{Ratios, SmmError};

/// Which of the three Godunov flux branches is active at an interface.
#[derive(Clone, Copy)]
enum Branch {
    Demand,
    Supply,
    Capacity,
}

fn branch(up: f64, down: f64, fd: &FundamentalDiagram) -> Branch {
    let d = fd.v_m * up;
    let s = fd.w * (fd.rho_m - down);
    if d <= s && d <= fd.q_m {
        Branch::Demand
    } else if s <= fd.q_m {
        Branch::Supply
    } else {
        Branch::Capacity
    }
}

/// Affine model `ρ' = A·ρ + c` of the CTM around `rho` for a road whose end
/// cells see zero-gradient ghosts.
///
/// Every interface flux is replaced by its active branch at `rho`. For states
/// consistent with an FF, CC or CF section mode this reproduces that mode's
/// matrices; for general states it extends the same construction to any
/// number of freeflow/congestion transitions.
pub fn godunov_linearization(
    rho: &DVector<f64>,
    fd: &FundamentalDiagram,
    grid: &Grid,
) -> Result<(DMatrix<f64>, DVector<f64>), SmmError> {
    let n = rho.len();
    if n < 2 {
        return Err(SmmError::InvalidSize("linearization needs at least 2 cells".into()));
    }
    let Ratios { r, .. } = Ratios::new(fd, grid)?;
    let mut a = DMatrix::identity(n, n);
    let mut c = DVector::zeros(n);
    // Interface f sits between cell f−1 and cell f; interfaces 0 and n touch
    // the ghosts, which copy the adjacent cell.
    for f in 0..=n {
        let up = if f == 0 { 0 } else { f - 1 };
        let down = if f == n { n - 1 } else { f };
        // Flux = coef·ρ[cell] + constant.
        let (cell, coef, constant) = match branch(rho[up], rho[down], fd) {
            Branch::Demand => (up, fd.v_m, 0.0),
            Branch::Supply => (down, -fd.w, fd.w * fd.rho_m),
            Branch::Capacity => (up, 0.0, fd.q_m),
        };
        if f > 0 {
            a[(f - 1, cell)] -= r * coef;
            c[f - 1] -= r * constant;
        }
        if f < n {
            a[(f, cell)] += r * coef;
            c[f] += r * constant;
        }
    }
    Ok((a, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{build_mode_matrices, Mode};

    #[test]
    fn reproduces_observable_modes() {
        let fd = FundamentalDiagram::normalized();
        let grid = Grid::new(1.0, 0.5, 6).unwrap();
        let cases = [
            (Mode::ff(), vec![0.1, 0.2, 0.05, 0.15, 0.2, 0.1]),
            (Mode::cc(), vec![0.6, 0.7, 0.9, 0.5, 0.4, 0.8]),
            (Mode::cf(2), vec![0.6, 0.7, 0.1, 0.15, 0.2, 0.1]),
        ];
        for (mode, rho) in cases {
            let rho = DVector::from_vec(rho);
            let (a, c) = godunov_linearization(&rho, &fd, &grid).unwrap();
            let m = build_mode_matrices(mode, 6, &fd, &grid).unwrap();
            assert!((&a - &m.a).abs().max() < 1e-15, "{mode}");
            assert!((&c - m.affine(&fd)).abs().max() < 1e-15, "{mode}");
        }
    }
}
