use serde::{Deserialize, Serialize};

use crate::{BoundaryValues, CtmError, FundamentalDiagram, Grid};

/// Densities of every cell at one time index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    /// Cell densities, upstream first.
    pub rho: Vec<f64>,
    /// Time index.
    pub k: usize,
}

impl DensityProfile {
    /// Wraps a density vector at time index `k`.
    pub fn new(rho: Vec<f64>, k: usize) -> Self {
        Self { rho, k }
    }

    /// Total mass `Σ rho` (in units of density times cells).
    pub fn mass(&self) -> f64 {
        self.rho.iter().sum()
    }

    /// Rejects NaN and negative entries.
    pub fn validate(&self) -> Result<(), CtmError> {
        for (cell, &value) in self.rho.iter().enumerate() {
            if value.is_nan() || value < 0.0 {
                return Err(CtmError::InvalidDensity { cell, value });
            }
        }
        Ok(())
    }
}

/// Godunov flux between an upstream and a downstream cell:
/// `min{v_m·rho_up, w·(rho_m − rho_down), q_m}`.
pub fn flux(rho_up: f64, rho_down: f64, fd: &FundamentalDiagram) -> f64 {
    (fd.v_m * rho_up).min(fd.w * (fd.rho_m - rho_down)).min(fd.q_m)
}

/// One conservative update with explicit ghost densities on both ends.
///
/// No validation is performed; this is the raw scheme
/// `rho_l + (dt/dx)(f(rho_{l-1}, rho_l) − f(rho_l, rho_{l+1}))`.
pub fn godunov_update(rho: &[f64], ghost_up: f64, ghost_down: f64, fd: &FundamentalDiagram, ratio: f64) -> Vec<f64> {
    let n = rho.len();
    let mut fluxes = Vec::with_capacity(n + 1);
    fluxes.push(flux(ghost_up, rho[0], fd));
    for l in 0..n.saturating_sub(1) {
        fluxes.push(flux(rho[l], rho[l + 1], fd));
    }
    fluxes.push(flux(rho[n - 1], ghost_down, fd));
    (0..n).map(|l| rho[l] + ratio * (fluxes[l] - fluxes[l + 1])).collect()
}

/// Advances a profile by one step of the CTM.
///
/// When `noise` is given it is added after the conservative update and the
/// result is clipped to `[0, rho_m]`.
pub fn ctm_step(
    profile: &DensityProfile,
    bc: BoundaryValues,
    fd: &FundamentalDiagram,
    grid: &Grid,
    noise: Option<&[f64]>,
) -> Result<DensityProfile, CtmError> {
    grid.check_cfl(fd)?;
    profile.validate()?;
    let n = profile.rho.len();
    if n == 0 {
        return Err(CtmError::Dimension { expected: 1, got: 0 });
    }
    let mut next = godunov_update(&profile.rho, bc.upstream, bc.downstream, fd, grid.ratio());
    if let Some(noise) = noise {
        if noise.len() != n {
            return Err(CtmError::Dimension { expected: n, got: noise.len() });
        }
        for (value, draw) in next.iter_mut().zip(noise) {
            *value = (*value + draw).clamp(0.0, fd.rho_m);
        }
    }
    Ok(DensityProfile { rho: next, k: profile.k + 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (FundamentalDiagram, Grid) {
        (FundamentalDiagram::normalized(), Grid::new(1.0, 0.5, 8).unwrap())
    }

    #[test]
    fn flux_trivial_cases() {
        let (fd, _) = setup();
        for x in [0.0, 0.1, 0.5, 1.0] {
            assert_eq!(flux(0.0, x, &fd), 0.0);
            assert_eq!(flux(x, fd.rho_m, &fd), 0.0);
        }
        assert!((flux(fd.rho_c, fd.rho_c, &fd) - fd.q_m).abs() < 1e-15);
    }

    #[test]
    fn uniform_profile_is_stationary() {
        let (fd, grid) = setup();
        for c in [0.1, 0.25, 0.6, 1.0] {
            let p = DensityProfile::new(vec![c; 8], 0);
            let next = ctm_step(&p, BoundaryValues { upstream: c, downstream: c }, &fd, &grid, None).unwrap();
            for v in &next.rho {
                assert!((v - c).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rejects_negative_and_nan() {
        let (fd, grid) = setup();
        let mut p = DensityProfile::new(vec![0.1; 8], 0);
        p.rho[3] = -0.1;
        assert!(ctm_step(&p, BoundaryValues::default(), &fd, &grid, None).is_err());
        p.rho[3] = f64::NAN;
        assert!(ctm_step(&p, BoundaryValues::default(), &fd, &grid, None).is_err());
    }

    #[test]
    fn noise_is_clipped() {
        let (fd, grid) = setup();
        let p = DensityProfile::new(vec![0.5; 8], 0);
        let noise = [5.0, -5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let bc = BoundaryValues { upstream: 0.5, downstream: 0.5 };
        let next = ctm_step(&p, bc, &fd, &grid, Some(&noise)).unwrap();
        assert_eq!(next.rho[0], 1.0);
        assert_eq!(next.rho[1], 0.0);
    }
}
