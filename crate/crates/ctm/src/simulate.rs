use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{ctm_step, BoundarySignal, BoundarySpec, BoundaryTrace, CtmError, DensityProfile, FundamentalDiagram, Grid};

/// Stream id of the model-noise generator derived from a run seed.
pub const MODEL_NOISE_STREAM: u64 = 1;

/// Constant-density block starting at `start` (0-based) and extending to the
/// next segment or the end of the road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// First cell of the block.
    pub start: usize,
    /// Density of the block.
    pub value: f64,
}

/// Initial condition of the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProfile {
    /// Every cell at the same density.
    Uniform { value: f64 },
    /// Piecewise-constant blocks; the first segment must start at cell 0.
    Piecewise { segments: Vec<Segment> },
    /// Explicit per-cell densities.
    Explicit { values: Vec<f64> },
}

impl InitialProfile {
    /// Expands the profile to `n` cells, validating the range `[0, rho_m]`.
    pub fn build(&self, n: usize, fd: &FundamentalDiagram) -> Result<Vec<f64>, CtmError> {
        let rho = match self {
            Self::Uniform { value } => vec![*value; n],
            Self::Piecewise { segments } => {
                if segments.first().map(|s| s.start) != Some(0) {
                    return Err(CtmError::InvalidScenario("first segment must start at cell 0".into()));
                }
                if segments.windows(2).any(|w| w[1].start <= w[0].start) {
                    return Err(CtmError::InvalidScenario("segment starts must increase".into()));
                }
                let mut rho = vec![0.0; n];
                for (idx, seg) in segments.iter().enumerate() {
                    let end = segments.get(idx + 1).map_or(n, |s| s.start.min(n));
                    for cell in seg.start.min(n)..end {
                        rho[cell] = seg.value;
                    }
                }
                rho
            }
            Self::Explicit { values } => {
                if values.len() != n {
                    return Err(CtmError::Dimension { expected: n, got: values.len() });
                }
                values.clone()
            }
        };
        for (cell, &value) in rho.iter().enumerate() {
            if !(0.0..=fd.rho_m).contains(&value) {
                return Err(CtmError::InvalidDensity { cell, value });
            }
        }
        Ok(rho)
    }
}

/// Everything needed to generate a ground-truth density field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthScenario {
    /// Fundamental diagram of the true road.
    pub fd: FundamentalDiagram,
    /// Discretization.
    pub grid: Grid,
    /// Initial condition.
    pub initial: InitialProfile,
    /// Ghost-cell signals.
    pub boundary: BoundarySpec,
    /// Standard deviation of the additive model noise (0 disables it).
    pub model_noise_std: f64,
}

impl TruthScenario {
    /// Expansion fan followed by an upstream-moving shock, driven by a
    /// sinusoidal upstream inflow.
    ///
    /// The road starts congested on its first third, freeflow on the middle
    /// third and congested on the last third. The congested-to-freeflow edge
    /// opens a fan and the freeflow-to-congested edge is a shock whose speed
    /// is negative for the default densities.
    pub fn shock_and_fan(n_cells: usize) -> Self {
        let a = n_cells / 3;
        let b = 2 * n_cells / 3;
        Self {
            fd: FundamentalDiagram::normalized(),
            grid: Grid { dx: 1.0, dt: 0.5, n_cells },
            initial: InitialProfile::Piecewise {
                segments: vec![
                    Segment { start: 0, value: 0.55 },
                    Segment { start: a, value: 0.15 },
                    Segment { start: b, value: 0.75 },
                ],
            },
            boundary: BoundarySpec {
                upstream: BoundarySignal::Sinusoid { mean: 0.17, amplitude: 0.08, period: 200.0, phase: 0.0 },
                downstream: BoundarySignal::Constant { value: 0.75 },
            },
            model_noise_std: 0.0,
        }
    }

    /// Validates the grid, CFL condition, boundary signals and initial profile.
    pub fn validate(&self) -> Result<(), CtmError> {
        self.grid.validate()?;
        self.grid.check_cfl(&self.fd)?;
        self.fd.check_invariants()?;
        self.boundary.validate()?;
        if !(self.model_noise_std.is_finite() && self.model_noise_std >= 0.0) {
            return Err(CtmError::InvalidScenario(format!(
                "model noise std must be nonnegative, got {}",
                self.model_noise_std
            )));
        }
        self.initial.build(self.grid.n_cells, &self.fd).map(|_| ())
    }
}

/// Ground-truth densities for steps `0..=k_max` and the boundary data used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Profiles indexed by time step.
    pub profiles: Vec<DensityProfile>,
    /// Ghost densities; entry `k` drives the update from `k` to `k + 1`.
    pub trace: BoundaryTrace,
}

/// Runs the CTM for `k_max` steps. Deterministic for a fixed seed.
pub fn simulate(scenario: &TruthScenario, k_max: usize, seed: u64) -> Result<Trajectory, CtmError> {
    scenario.validate()?;
    let n = scenario.grid.n_cells;
    let trace = scenario.boundary.trace(k_max.max(1), &scenario.fd);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(MODEL_NOISE_STREAM);
    let normal = if scenario.model_noise_std > 0.0 {
        Some(Normal::new(0.0, scenario.model_noise_std).map_err(|e| CtmError::InvalidScenario(e.to_string()))?)
    } else {
        None
    };
    let mut profiles = Vec::with_capacity(k_max + 1);
    profiles.push(DensityProfile::new(scenario.initial.build(n, &scenario.fd)?, 0));
    let mut noise = vec![0.0; n];
    for k in 0..k_max {
        let draws = normal.as_ref().map(|dist| {
            for value in noise.iter_mut() {
                *value = dist.sample(&mut rng);
            }
            noise.as_slice()
        });
        let next = ctm_step(&profiles[k], trace.at(k), &scenario.fd, &scenario.grid, draws)?;
        profiles.push(next);
    }
    Ok(Trajectory { profiles, trace })
}
