//! Shared setup for the filter integration tests.

#![allow(dead_code)]

use ctm::{FundamentalDiagram, Grid};
use dlkcf::{AgentModel, DistributedFilter, DropPolicy, FilterConfig, Gaussian, PartitionLayout, SensorLayout, SensorPlan};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn models(layout: &PartitionLayout, q: f64) -> Vec<AgentModel> {
    let fd = FundamentalDiagram::normalized();
    (0..layout.n_sections())
        .map(|i| {
            let n = layout.dim(i);
            AgentModel { fd, grid: Grid::new(1.0, 0.5, n).unwrap(), q: DMatrix::identity(n, n) * q }
        })
        .collect()
}

pub fn random_beliefs(layout: &PartitionLayout, seed: u64, spread: f64, var: f64) -> Vec<Gaussian> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..layout.n_sections())
        .map(|i| {
            let n = layout.dim(i);
            let mean = DVector::from_fn(n, |_, _| spread * rng.gen_range(-1.0..1.0));
            let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-0.3..0.3));
            let cov = DMatrix::identity(n, n) * var + &b * b.transpose() * 0.1 * var;
            Gaussian::new(mean, cov).unwrap()
        })
        .collect()
}

pub fn plan(positions: Vec<usize>) -> SensorPlan {
    SensorPlan { positions, ..SensorPlan::default() }
}

pub fn bank(layout: &PartitionLayout, plan: &SensorPlan, config: FilterConfig, initial: Vec<Gaussian>) -> DistributedFilter {
    let sensors = SensorLayout::from_plan(layout, plan).unwrap();
    DistributedFilter::new(layout.clone(), sensors, models(layout, 0.01), initial, config, DropPolicy::None).unwrap()
}
