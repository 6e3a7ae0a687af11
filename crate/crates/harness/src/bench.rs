//! Runtime comparison of the distributed filter against the central KF.

use dlkcf::SensorPlan;
use serde::{Deserialize, Serialize};

use crate::run::{prepare, run_filter};
use crate::scenario::{FilterKind, PartitionSpec, PerturbationSpec, Scenario, TruthSpec};
use crate::HarnessError;

/// Timing of one estimator in a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    /// Estimator.
    pub filter: FilterKind,
    /// Number of agents (one for the central KF).
    pub agents: usize,
    /// Mean computation seconds per agent.
    pub per_agent_seconds: f64,
    /// Largest computation seconds of a single agent.
    pub max_agent_seconds: f64,
    /// Wall time of the whole filter loop, metrics included.
    pub wall_seconds: f64,
}

/// Timing table of one benchmark configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingTable {
    /// Road length `n`.
    pub n_total: usize,
    /// Section length `n_l`.
    pub section_len: usize,
    /// Overlap `n̂`.
    pub overlap: usize,
    /// Number of sections `N`.
    pub sections: usize,
    /// Steps.
    pub k_max: usize,
    /// One row per estimator.
    pub rows: Vec<TimingRow>,
}

impl TimingTable {
    /// Row of `filter`, if it was timed.
    pub fn row(&self, filter: FilterKind) -> Option<&TimingRow> {
        self.rows.iter().find(|r| r.filter == filter)
    }

    /// Central KF time divided by the DLKCF per-agent time.
    pub fn speedup(&self) -> Option<f64> {
        Some(self.row(FilterKind::Central)?.per_agent_seconds / self.row(FilterKind::Dlkcf)?.per_agent_seconds)
    }
}

/// Scenario of a benchmark: the shock-and-fan road of `n_total` cells with
/// four regular sensors per section and unperturbed agent models.
pub fn benchmark_scenario(
    n_total: usize,
    section_len: usize,
    overlap: usize,
    sections: usize,
    k_max: usize,
) -> Result<Scenario, HarnessError> {
    let partition = PartitionSpec { sections, section_len, overlap };
    if partition.n_total() != n_total {
        return Err(HarnessError::Scenario(format!(
            "benchmark layout: {sections} sections of {section_len} cells with overlap {overlap} cover {} cells, not {n_total}",
            partition.n_total()
        )));
    }
    if section_len < 4 {
        return Err(HarnessError::Scenario(format!("benchmark layout: sections need at least 4 cells, got {section_len}")));
    }
    let half = section_len / 2;
    let scenario = Scenario {
        name: format!("bench-{n_total}-{section_len}-{overlap}-{sections}"),
        truth: TruthSpec::shock_and_fan(n_total),
        partition,
        sensors: SensorPlan { positions: vec![0, half - 1, half + 1, section_len - 1], ..SensorPlan::default() },
        perturbation: PerturbationSpec { enabled: false, ..PerturbationSpec::default() },
        filters: vec![FilterKind::Dlkcf, FilterKind::Central],
        k_max,
        ..Scenario::default()
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Times the estimators of `scenario.filters` on one seed, serially.
pub fn time_scenario(scenario: &Scenario, seed: u64) -> Result<Vec<TimingRow>, HarnessError> {
    let inputs = prepare(scenario, seed)?;
    scenario
        .filters
        .iter()
        .map(|&kind| {
            let rec = run_filter(scenario, &inputs, kind, seed, None)?;
            let t = &rec.timings;
            Ok(TimingRow {
                filter: kind,
                agents: t.agent_seconds.len(),
                per_agent_seconds: t.mean_agent_seconds(),
                max_agent_seconds: t.agent_seconds.iter().copied().fold(0.0, f64::max),
                wall_seconds: t.wall_seconds,
            })
        })
        .collect()
}

/// Per-agent DLKCF time against central KF time for `sections` sections of
/// `n_l` cells overlapping by `n_hat` on a road of `n_total` cells.
pub fn run_benchmark(n_total: usize, n_l: usize, n_hat: usize, sections: usize, k_max: usize) -> Result<TimingTable, HarnessError> {
    let scenario = benchmark_scenario(n_total, n_l, n_hat, sections, k_max)?;
    timing_table(&scenario)
}

/// Timing table of an arbitrary scenario on its base seed.
pub fn timing_table(scenario: &Scenario) -> Result<TimingTable, HarnessError> {
    let p = scenario.partition;
    Ok(TimingTable {
        n_total: p.n_total(),
        section_len: p.section_len,
        overlap: p.overlap,
        sections: p.sections,
        k_max: scenario.k_max,
        rows: time_scenario(scenario, scenario.seed)?,
    })
}
