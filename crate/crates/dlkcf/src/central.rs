//! Centralized KF over the whole road.

use std::time::{Duration, Instant};

use ctm::{FundamentalDiagram, Grid};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use smm::{build_mode_matrices, godunov_linearization, infer_mode, Mode};

use crate::kf::{kf_correct, kf_predict, Gaussian};
use crate::{FilterError, SensorLayout};

/// Dynamics the central KF uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CentralModel {
    /// Godunov-branch linearization of the CTM around the current estimate.
    #[default]
    Linearized,
    /// The road treated as a single SMM section with an inferred mode.
    SectionMode,
}

/// Kalman filter of dimension `n_total` fusing every sensor.
#[derive(Debug, Clone)]
pub struct CentralKf {
    fd: FundamentalDiagram,
    grid: Grid,
    q: DMatrix<f64>,
    h: DMatrix<f64>,
    r: DMatrix<f64>,
    boundary: (usize, usize),
    model: CentralModel,
    include_affine: bool,
    belief: Gaussian,
    mode: Option<Mode>,
    last_boundary: Option<(f64, f64)>,
    elapsed: Duration,
}

impl CentralKf {
    /// Central filter for a road described by `grid` (with `n_cells = n_total`).
    pub fn new(
        fd: FundamentalDiagram,
        grid: Grid,
        q: DMatrix<f64>,
        sensors: &SensorLayout,
        initial: Gaussian,
        model: CentralModel,
        include_affine: bool,
    ) -> Result<Self, FilterError> {
        let n = grid.n_cells;
        grid.check_cfl(&fd)?;
        if q.shape() != (n, n) || initial.dim() != n {
            return Err(FilterError::Dimension { what: "central model", expected: n, got: initial.dim() });
        }
        let find = |cell: usize| {
            sensors
                .sensors()
                .iter()
                .position(|s| s.cell == cell)
                .ok_or_else(|| FilterError::Sensors(format!("no sensor on road boundary cell {cell}")))
        };
        let boundary = (find(0)?, find(n - 1)?);
        let (h, r) = sensors.global_output(n);
        Ok(Self {
            fd,
            grid,
            q,
            h,
            r,
            boundary,
            model,
            include_affine,
            belief: initial,
            mode: None,
            last_boundary: None,
            elapsed: Duration::ZERO,
        })
    }

    /// Current posterior belief.
    pub fn belief(&self) -> &Gaussian {
        &self.belief
    }

    /// Cumulative computation time.
    pub fn elapsed(&self) -> Duration {
        self.elapsed
    }

    /// One prediction and correction with one reading per sensor.
    pub fn step(&mut self, readings: &[f64]) -> Result<(), FilterError> {
        if readings.len() != self.h.nrows() {
            return Err(FilterError::Dimension { what: "readings", expected: self.h.nrows(), got: readings.len() });
        }
        let t = Instant::now();
        let x = &self.belief.mean;
        let n = x.len();
        let (a, c) = match self.model {
            CentralModel::Linearized => godunov_linearization(x, &self.fd, &self.grid)?,
            CentralModel::SectionMode => {
                let (up, down) = self.last_boundary.unwrap_or((x[0], x[n - 1]));
                let mode = infer_mode(up, down, self.mode, x, &self.fd);
                self.mode = Some(mode);
                let m = build_mode_matrices(mode, n, &self.fd, &self.grid)?;
                let c = m.affine(&self.fd);
                (m.a, c)
            }
        };
        let offset = self.include_affine.then_some(&c);
        let prior = kf_predict(&self.belief, &a, offset, &self.q)?;
        let z = DVector::from_column_slice(readings);
        self.belief = kf_correct(&prior, &z, &self.h, &self.r)?.posterior;
        self.last_boundary = Some((readings[self.boundary.0], readings[self.boundary.1]));
        self.elapsed += t.elapsed();
        Ok(())
    }
}
