use ctm::{FundamentalDiagram, Grid};
use serde::{Deserialize, Serialize};
use smm::Ratios;

use crate::BoundsError;

/// Section size above which the sequence extremization is sampled.
pub const DEFAULT_EXHAUSTIVE_LIMIT: usize = 6;

/// Number of random sequences drawn when the enumeration is sampled.
pub const DEFAULT_SAMPLES: usize = 100_000;

/// Parameters every bound depends on.
///
/// `q1 ≤ Q ≤ q2` and `r1 ≤ R ≤ r2` bracket the model and measurement noise
/// covariances, `c_hat` bounds the norm of the consensus term, and
/// `epsilon`, `delta` are the error levels used by the interval bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    /// Section dimension.
    pub n: usize,
    /// Fundamental diagram.
    pub fd: FundamentalDiagram,
    /// Cell length.
    pub dx: f64,
    /// Time step.
    pub dt: f64,
    /// Lower model noise bound.
    pub q1: f64,
    /// Upper model noise bound.
    pub q2: f64,
    /// Lower measurement noise bound.
    pub r1: f64,
    /// Upper measurement noise bound.
    pub r2: f64,
    /// Bound on the consensus term.
    pub c_hat: f64,
    /// Error level entering the unobservable-interval bound.
    pub epsilon: f64,
    /// Error margin of the switching schedule.
    pub delta: f64,
    /// Largest `n` for which mode sequences are enumerated exhaustively.
    #[serde(default = "default_exhaustive_limit")]
    pub exhaustive_limit: usize,
    /// Random sequences drawn above the exhaustive limit.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Seed of the sequence sampler.
    #[serde(default)]
    pub seed: u64,
}

fn default_exhaustive_limit() -> usize {
    DEFAULT_EXHAUSTIVE_LIMIT
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

impl BoundConfig {
    /// Configuration with unit grid ratio 0.5 on the normalized diagram.
    pub fn normalized(n: usize) -> Self {
        Self {
            n,
            fd: FundamentalDiagram::normalized(),
            dx: 1.0,
            dt: 0.5,
            q1: 0.005,
            q2: 0.02,
            r1: 0.0005,
            r2: 0.002,
            c_hat: 0.01,
            epsilon: 0.05,
            delta: 0.05,
            exhaustive_limit: DEFAULT_EXHAUSTIVE_LIMIT,
            samples: DEFAULT_SAMPLES,
            seed: 0,
        }
    }

    /// Grid of one section.
    pub fn grid(&self) -> Result<Grid, BoundsError> {
        Grid::new(self.dx, self.dt, self.n).map_err(|e| BoundsError::Config(e.to_string()))
    }

    /// Step ratios of the section grid.
    pub fn ratios(&self) -> Result<Ratios, BoundsError> {
        Ok(Ratios::new(&self.fd, &self.grid()?)?)
    }

    /// `T₁ = max{1, n − 2}`.
    pub fn t1(&self) -> usize {
        self.n.saturating_sub(2).max(1)
    }

    /// Checks the parameter invariants.
    pub fn validate(&self) -> Result<(), BoundsError> {
        let fail = |m: String| Err(BoundsError::Config(m));
        if self.n < 2 {
            return fail(format!("n = {} must be at least 2", self.n));
        }
        let positive = [
            ("q1", self.q1),
            ("q2", self.q2),
            ("r1", self.r1),
            ("r2", self.r2),
            ("epsilon", self.epsilon),
            ("delta", self.delta),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} = {v} must be positive"));
            }
        }
        if !(self.c_hat.is_finite() && self.c_hat >= 0.0) {
            return fail(format!("c_hat = {} must be nonnegative", self.c_hat));
        }
        if self.q1 >= self.q2 {
            return fail(format!("need q1 < q2, got {} >= {}", self.q1, self.q2));
        }
        if self.r1 >= self.r2 {
            return fail(format!("need r1 < r2, got {} >= {}", self.r1, self.r2));
        }
        if self.samples == 0 {
            return fail("samples must be positive".into());
        }
        self.ratios()?;
        Ok(())
    }
}
