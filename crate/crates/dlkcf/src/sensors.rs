//! Sensor placement, ownership and the stacked output matrices each agent
//! builds from its own and its neighbors' sensors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{FilterError, PartitionLayout};

/// A point density sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensor {
    /// Global cell index.
    pub cell: usize,
    /// Section that owns the sensor and forwards its readings.
    pub owner: usize,
    /// Actual measurement noise standard deviation.
    pub std: f64,
    /// Standard deviation the owner reports to the filters.
    pub reported_std: f64,
}

/// Recipe for placing sensors section by section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorPlan {
    /// Local sensor positions inside every section; must include the first
    /// and last cell.
    pub positions: Vec<usize>,
    /// Noise standard deviation of a regular sensor.
    pub std: f64,
    /// Noise standard deviation of a large-error sensor.
    pub large_std: f64,
    /// Whether large-error sensors are present.
    pub heterogeneous: bool,
    /// A large-error sensor occurs once every `large_period` sensors ...
    pub large_period: usize,
    /// ... starting at this index in the section-by-section sensor order.
    pub large_first: usize,
    /// Whether sections with an odd 0-based index (even 1-based index)
    /// report `std` instead of `large_std` for the large-error sensors they own.
    pub inconsistent_agents: bool,
}

impl Default for SensorPlan {
    fn default() -> Self {
        Self {
            positions: vec![0, 12, 15, 27],
            std: 0.03,
            large_std: 0.3,
            heterogeneous: false,
            large_period: 3,
            large_first: 3,
            inconsistent_agents: false,
        }
    }
}

/// Which sensors an agent fuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sharing {
    /// Only the sensors the agent owns.
    Local,
    /// Own sensors plus neighbor-owned sensors lying inside the section.
    Neighbors,
}

/// All sensors of the road.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    sensors: Vec<Sensor>,
}

impl SensorLayout {
    /// Places sensors according to `plan`, owned by the section that placed them.
    pub fn from_plan(layout: &PartitionLayout, plan: &SensorPlan) -> Result<Self, FilterError> {
        if plan.std <= 0.0 || plan.large_std <= 0.0 || plan.large_period == 0 {
            return Err(FilterError::Sensors("noise levels and the large-error period must be positive".into()));
        }
        let mut sensors = Vec::new();
        for i in 0..layout.n_sections() {
            let sec = layout.section(i);
            for &p in &plan.positions {
                if p >= sec.len {
                    return Err(FilterError::Sensors(format!(
                        "sensor position {p} is outside section {i} of {} cells",
                        sec.len
                    )));
                }
                let idx = sensors.len();
                let large = plan.heterogeneous && idx >= plan.large_first && (idx - plan.large_first) % plan.large_period == 0;
                let std = if large { plan.large_std } else { plan.std };
                let reported_std = if large && plan.inconsistent_agents && i % 2 == 1 { plan.std } else { std };
                sensors.push(Sensor { cell: sec.start + p, owner: i, std, reported_std });
            }
        }
        Self::new(layout, sensors)
    }

    /// Validated explicit sensor list.
    pub fn new(layout: &PartitionLayout, sensors: Vec<Sensor>) -> Result<Self, FilterError> {
        let out = Self { sensors };
        out.validate(layout)?;
        Ok(out)
    }

    /// Checks ranges, noise levels and boundary coverage.
    pub fn validate(&self, layout: &PartitionLayout) -> Result<(), FilterError> {
        for (idx, s) in self.sensors.iter().enumerate() {
            if s.owner >= layout.n_sections() {
                return Err(FilterError::Sensors(format!("sensor {idx} names unknown owner {}", s.owner)));
            }
            if layout.local_index(s.owner, s.cell).is_none() {
                return Err(FilterError::Sensors(format!(
                    "sensor {idx} at cell {} lies outside its owner section {}",
                    s.cell, s.owner
                )));
            }
            if !(s.std > 0.0 && s.reported_std > 0.0) {
                return Err(FilterError::Sensors(format!("sensor {idx} needs positive noise levels")));
            }
        }
        for i in 0..layout.n_sections() {
            let sec = layout.section(i);
            for cell in [sec.start, sec.end() - 1] {
                if self.boundary_sensor(i, cell).is_none() {
                    return Err(FilterError::Sensors(format!("section {i} has no sensor on boundary cell {cell}")));
                }
            }
        }
        Ok(())
    }

    fn boundary_sensor(&self, i: usize, cell: usize) -> Option<usize> {
        self.sensors.iter().position(|s| s.owner == i && s.cell == cell)
    }

    /// Indices of the sensors on the first and last cell of section `i`.
    pub fn boundary_sensors(&self, layout: &PartitionLayout, i: usize) -> (usize, usize) {
        let sec = layout.section(i);
        let up = self.boundary_sensor(i, sec.start).expect("validated layout");
        let down = self.boundary_sensor(i, sec.end() - 1).expect("validated layout");
        (up, down)
    }

    /// All sensors.
    pub fn sensors(&self) -> &[Sensor] {
        &self.sensors
    }

    /// Number of sensors.
    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    /// Whether there are no sensors.
    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    /// Indices of sensors owned by section `i`.
    pub fn owned(&self, i: usize) -> Vec<usize> {
        (0..self.sensors.len()).filter(|&s| self.sensors[s].owner == i).collect()
    }

    /// Sensors agent `i` fuses, ordered by ascending owner then index.
    pub fn visible(&self, layout: &PartitionLayout, i: usize, sharing: Sharing) -> Vec<usize> {
        let mut owners = vec![i];
        if sharing == Sharing::Neighbors {
            owners.extend(layout.neighbors(i));
            owners.sort_unstable();
        }
        owners
            .into_iter()
            .flat_map(|o| self.owned(o))
            .filter(|&s| layout.local_index(i, self.sensors[s].cell).is_some())
            .collect()
    }

    /// Output matrix and reported noise covariance of `indices` in the state
    /// space of section `i`.
    pub fn output(&self, layout: &PartitionLayout, i: usize, indices: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = layout.dim(i);
        let mut h = DMatrix::zeros(indices.len(), n);
        let mut var = DVector::zeros(indices.len());
        for (row, &s) in indices.iter().enumerate() {
            let sensor = self.sensors[s];
            let l = layout.local_index(i, sensor.cell).expect("sensor visible to section");
            h[(row, l)] = 1.0;
            var[row] = sensor.reported_std * sensor.reported_std;
        }
        (h, DMatrix::from_diagonal(&var))
    }

    /// Output matrix and reported covariance of every sensor over the whole road.
    pub fn global_output(&self, n_total: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut h = DMatrix::zeros(self.sensors.len(), n_total);
        let mut var = DVector::zeros(self.sensors.len());
        for (row, s) in self.sensors.iter().enumerate() {
            h[(row, s.cell)] = 1.0;
            var[row] = s.reported_std * s.reported_std;
        }
        (h, DMatrix::from_diagonal(&var))
    }
}
