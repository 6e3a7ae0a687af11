use serde::{Deserialize, Serialize};

use crate::{CtmError, FundamentalDiagram};

/// Ghost-cell densities on both ends of the road at one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryValues {
    /// Upstream ghost density.
    pub upstream: f64,
    /// Downstream ghost density.
    pub downstream: f64,
}

/// Time signal used for one ghost cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundarySignal {
    /// Constant ghost density.
    Constant { value: f64 },
    /// `mean + amplitude·sin(2π·k/period + phase)`, clipped to `[0, rho_m]`.
    Sinusoid { mean: f64, amplitude: f64, period: f64, phase: f64 },
}

impl BoundarySignal {
    /// Value of the signal at step `k`, clipped to `[0, rho_m]`.
    pub fn value(&self, k: usize, rho_m: f64) -> f64 {
        let raw = match *self {
            Self::Constant { value } => value,
            Self::Sinusoid { mean, amplitude, period, phase } => {
                mean + amplitude * (std::f64::consts::TAU * k as f64 / period + phase).sin()
            }
        };
        raw.clamp(0.0, rho_m)
    }

    fn validate(&self) -> Result<(), CtmError> {
        match *self {
            Self::Constant { value } if !value.is_finite() => {
                Err(CtmError::InvalidScenario("constant boundary value must be finite".into()))
            }
            Self::Sinusoid { period, .. } if !(period.is_finite() && period > 0.0) => {
                Err(CtmError::InvalidScenario(format!("sinusoid period must be positive, got {period}")))
            }
            _ => Ok(()),
        }
    }
}

/// Boundary conditions for both road ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    /// Upstream ghost signal.
    pub upstream: BoundarySignal,
    /// Downstream ghost signal.
    pub downstream: BoundarySignal,
}

impl BoundarySpec {
    /// Constant ghost densities on both ends.
    pub fn constant(upstream: f64, downstream: f64) -> Self {
        Self {
            upstream: BoundarySignal::Constant { value: upstream },
            downstream: BoundarySignal::Constant { value: downstream },
        }
    }

    /// Validates both signals.
    pub fn validate(&self) -> Result<(), CtmError> {
        self.upstream.validate()?;
        self.downstream.validate()
    }

    /// Samples the signals for steps `0..len`.
    pub fn trace(&self, len: usize, fd: &FundamentalDiagram) -> BoundaryTrace {
        BoundaryTrace {
            upstream: (0..len).map(|k| self.upstream.value(k, fd.rho_m)).collect(),
            downstream: (0..len).map(|k| self.downstream.value(k, fd.rho_m)).collect(),
        }
    }
}

/// Sampled ghost densities per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrace {
    /// Upstream ghost density per step.
    pub upstream: Vec<f64>,
    /// Downstream ghost density per step.
    pub downstream: Vec<f64>,
}

impl BoundaryTrace {
    /// Ghost values used for the update from step `k` to `k + 1`.
    pub fn at(&self, k: usize) -> BoundaryValues {
        BoundaryValues { upstream: self.upstream[k], downstream: self.downstream[k] }
    }

    /// Number of sampled steps.
    pub fn len(&self) -> usize {
        self.upstream.len()
    }

    /// True when no step is sampled.
    pub fn is_empty(&self) -> bool {
        self.upstream.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_is_clipped_and_periodic() {
        let s = BoundarySignal::Sinusoid { mean: 0.2, amplitude: 0.5, period: 40.0, phase: 0.0 };
        for k in 0..200 {
            let v = s.value(k, 1.0);
            assert!((0.0..=1.0).contains(&v));
            assert!((v - s.value(k + 40, 1.0)).abs() < 1e-12);
        }
        assert_eq!(s.value(30, 1.0), 0.0);
    }

    #[test]
    fn trace_matches_signals() {
        let fd = FundamentalDiagram::normalized();
        let spec = BoundarySpec::constant(0.1, 0.9);
        let t = spec.trace(5, &fd);
        assert_eq!(t.len(), 5);
        assert_eq!(t.at(3), BoundaryValues { upstream: 0.1, downstream: 0.9 });
    }
}
