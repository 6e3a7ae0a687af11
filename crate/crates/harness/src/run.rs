//! Experiment execution: truth and measurement generation, the per-step
//! filter pipelines, metrics and invariant monitors.

use std::time::Instant;

use bounds::monitors::{check_information, check_upper, MonitorKind, Violation};
use bounds::{BoundConfig, BoundEngine, BoundReport};
use ctm::{simulate, FundamentalDiagram, Grid, Trajectory};
use dlkcf::metrics::{
    disagreement, estimation_error, gain_inf_norm, inverse_spectrum, lyapunov, nees, NeesSelection, RunMetrics,
    StepMetrics,
};
use dlkcf::{
    AgentModel, CentralKf, DistributedFilter, FilterConfig, FilterError, Gaussian, GammaRule, OptimalDlkcf,
    OptimalInput, PartitionLayout, SensorLayout, StepInput, Variant,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smm::{infer_mode, label_mode, Mode};

use crate::scenario::{FilterKind, InitialBelief, ModeSource, Scenario, SCENARIO_SCHEMA};
use crate::HarnessError;

/// Stream id of the measurement-noise generator derived from a run seed.
pub const MEASUREMENT_STREAM: u64 = 2;
/// Stream id of the initial-belief generator derived from a run seed.
pub const INITIAL_STREAM: u64 = 3;

/// Truth, measurements and initial belief shared by every filter of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunInputs {
    /// Ground truth for steps `0..=k_max`.
    pub truth: Trajectory,
    /// `readings[k − 1]` holds one value per sensor for step `k`.
    pub readings: Vec<Vec<f64>>,
    /// Initial mean over the whole road.
    pub initial_mean: Vec<f64>,
    /// `true_modes[k − 1]` holds the mode of every section driving step `k`.
    pub true_modes: Vec<Vec<Mode>>,
}

/// Generates the truth, noisy measurements and the initial belief of one run.
pub fn prepare(scenario: &Scenario, seed: u64) -> Result<RunInputs, HarnessError> {
    let truth_scenario = scenario.truth_scenario()?;
    let truth = simulate(&truth_scenario, scenario.k_max, seed)?;
    let layout = scenario.layout()?;
    let sensors = scenario.sensor_layout(&layout)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(MEASUREMENT_STREAM);
    let readings = (1..=scenario.k_max)
        .map(|k| {
            let rho = &truth.profiles[k].rho;
            sensors
                .sensors()
                .iter()
                .map(|s| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    rho[s.cell] + s.std * z
                })
                .collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INITIAL_STREAM);
    let initial_mean = match scenario.filter.initial {
        InitialBelief::Perturbed { std } => truth.profiles[0]
            .rho
            .iter()
            .map(|&x| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x + std * z
            })
            .collect(),
        InitialBelief::Uniform { value, .. } => vec![value; layout.n_total()],
    };

    let fd = truth_scenario.fd;
    let true_modes = (0..scenario.k_max)
        .map(|k| {
            let rho = &truth.profiles[k].rho;
            (0..layout.n_sections()).map(|i| label_mode(&layout.restrict(i, rho), &fd).mode).collect()
        })
        .collect();
    Ok(RunInputs { truth, readings, initial_mean, true_modes })
}

/// Wall-clock measurements of a run (excluded from reproducibility checks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Total wall time of the filter loop in seconds.
    pub wall_seconds: f64,
    /// Computation seconds per agent (one entry for the central KF).
    pub agent_seconds: Vec<f64>,
}

impl Timings {
    /// Average computation time per agent.
    pub fn mean_agent_seconds(&self) -> f64 {
        if self.agent_seconds.is_empty() {
            0.0
        } else {
            self.agent_seconds.iter().sum::<f64>() / self.agent_seconds.len() as f64
        }
    }
}

/// Outcome of running one filter on one scenario and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Scenario schema identifier.
    pub schema: String,
    /// SHA-256 of the scenario JSON.
    pub scenario_hash: String,
    /// Estimator.
    pub filter: FilterKind,
    /// Run seed.
    pub seed: u64,
    /// Metrics of steps `1..=k_max`.
    pub steps: Vec<StepMetrics>,
    /// Run totals.
    pub totals: RunMetrics,
    /// Bound constants per section (when monitors are enabled).
    pub bounds: Vec<BoundReport>,
    /// Monitor violations.
    pub violations: Vec<Violation>,
    /// Wall-clock data.
    pub timings: Timings,
}

impl RunRecord {
    /// The record without wall-clock data, for reproducibility comparisons.
    pub fn without_timings(&self) -> RunRecord {
        let mut r = self.clone();
        r.timings = Timings { wall_seconds: 0.0, agent_seconds: vec![0.0; r.timings.agent_seconds.len()] };
        r.totals.agent_seconds = vec![0.0; r.totals.agent_seconds.len()];
        r
    }
}

/// Agent models of a scenario (believed diagram, section grid, process noise).
pub fn agent_models(scenario: &Scenario, layout: &PartitionLayout) -> Result<Vec<AgentModel>, HarnessError> {
    let fds = scenario.agent_diagrams()?;
    Ok(fds
        .into_iter()
        .enumerate()
        .map(|(i, fd)| {
            let n = layout.dim(i);
            AgentModel { fd, grid: Grid { dx: scenario.truth.dx, dt: scenario.truth.dt, n_cells: n }, q: scenario.process_noise(n) }
        })
        .collect())
}

fn initial_beliefs(scenario: &Scenario, layout: &PartitionLayout, mean: &[f64]) -> Result<Vec<Gaussian>, HarnessError> {
    let var = scenario.filter.initial.std().powi(2);
    (0..layout.n_sections())
        .map(|i| {
            let n = layout.dim(i);
            Ok(Gaussian::new(layout.restrict(i, mean), DMatrix::identity(n, n) * var)?)
        })
        .collect()
}

/// Bound configuration of one section as seen by the monitors.
pub fn bound_config(scenario: &Scenario, fd: &FundamentalDiagram, n: usize, sensors: &SensorLayout) -> BoundConfig {
    let m = scenario.monitors;
    let q = scenario.filter.process_std.powi(2);
    let vars: Vec<f64> = sensors.sensors().iter().map(|s| s.reported_std.powi(2)).collect();
    let r_lo = vars.iter().copied().fold(f64::INFINITY, f64::min);
    let r_hi = vars.iter().copied().fold(0.0, f64::max);
    let c_hat = match scenario.filter.gamma_rule {
        GammaRule::Bounded { c_hat, .. } => c_hat,
        _ => 0.01,
    };
    BoundConfig {
        n,
        fd: *fd,
        dx: scenario.truth.dx,
        dt: scenario.truth.dt,
        q1: q / m.bracket,
        q2: q * m.bracket,
        r1: r_lo / m.bracket,
        r2: r_hi * m.bracket,
        c_hat,
        epsilon: m.epsilon,
        delta: m.delta,
        exhaustive_limit: m.exhaustive_limit,
        samples: m.samples,
        seed: scenario.seed,
    }
}

/// One bound engine per section, built in parallel.
pub fn section_engines(scenario: &Scenario) -> Result<Vec<BoundEngine>, HarnessError> {
    let layout = scenario.layout()?;
    let sensors = scenario.sensor_layout(&layout)?;
    let fds = scenario.agent_diagrams()?;
    fds.par_iter()
        .enumerate()
        .map(|(i, fd)| Ok(BoundEngine::new(bound_config(scenario, fd, layout.dim(i), &sensors))?))
        .collect()
}

/// Bound reports of every section evaluated at the initial covariance.
pub fn section_reports(scenario: &Scenario, engines: &[BoundEngine]) -> Result<Vec<BoundReport>, HarnessError> {
    let layout = scenario.layout()?;
    let var = scenario.filter.initial.std().powi(2);
    engines
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let n = layout.dim(i);
            Ok(e.report(&(DMatrix::identity(n, n) * var))?)
        })
        .collect()
}

/// Interval bookkeeping of the covariance and gain monitors for one agent.
#[derive(Debug, Clone)]
struct MonitorState {
    observable: Option<bool>,
    bound: (f64, f64),
}

/// Covariance and gain monitors of a distributed bank.
struct Monitors<'a> {
    engines: &'a [BoundEngine],
    slack: f64,
    state: Vec<MonitorState>,
    violations: Vec<Violation>,
}

impl<'a> Monitors<'a> {
    fn new(engines: &'a [BoundEngine], slack: f64) -> Self {
        let state = vec![MonitorState { observable: None, bound: (0.0, f64::INFINITY) }; engines.len()];
        Self { engines, slack, state, violations: Vec::new() }
    }

    /// Checks agent `i` at step `k`. `start` is the posterior covariance
    /// before the step, used when a new interval begins.
    fn check(
        &mut self,
        k: usize,
        i: usize,
        mode: Mode,
        start: &DMatrix<f64>,
        cov: &DMatrix<f64>,
        gain: &DMatrix<f64>,
    ) -> Result<(), HarnessError> {
        let obs = mode.is_observable();
        let st = &mut self.state[i];
        if st.observable != Some(obs) {
            let e = &self.engines[i];
            st.bound = if obs { e.information_bounds(start)? } else { (0.0, e.gain_bound(start)?) };
            st.observable = Some(obs);
        }
        if obs {
            self.violations.extend(check_information(k, i, cov, st.bound.0, st.bound.1, self.slack));
        } else if let Some(v) = check_upper(k, i, MonitorKind::Gain, gain_inf_norm(gain), st.bound.1) {
            self.violations.push(v);
        }
        Ok(())
    }
}

fn section_metrics(
    k: usize,
    layout: &PartitionLayout,
    truth: &[f64],
    means: &[DVector<f64>],
    covs: &[&DMatrix<f64>],
    gains: &[&DMatrix<f64>],
    selection: NeesSelection,
) -> StepMetrics {
    let errors: Vec<DVector<f64>> =
        means.iter().enumerate().map(|(i, m)| m - layout.restrict(i, truth)).collect();
    let owned: Vec<DMatrix<f64>> = covs.iter().map(|c| (*c).clone()).collect();
    let spectra: Vec<(f64, f64)> = covs.iter().map(|c| inverse_spectrum(c)).collect();
    StepMetrics {
        k,
        disagreement: disagreement(layout, means),
        error: estimation_error(layout, means, truth),
        lyapunov: lyapunov(&errors, &owned).ok(),
        nees: errors.iter().zip(covs).map(|(e, c)| nees(e, c, selection)).collect(),
        inv_cov_min: spectra.iter().map(|s| s.0).collect(),
        inv_cov_max: spectra.iter().map(|s| s.1).collect(),
        gain_inf: gains.iter().map(|g| gain_inf_norm(g)).collect(),
    }
}

/// Modes imposed on the agents at step `k`, or `None` to let them classify
/// their own readings.
fn select_modes(source: ModeSource, bank: &DistributedFilter, inputs: &RunInputs, k: usize) -> Option<Vec<Mode>> {
    match source {
        ModeSource::Measured => None,
        ModeSource::True => Some(inputs.true_modes[k - 1].clone()),
        ModeSource::ExactBoundary => {
            let rho = &inputs.truth.profiles[k - 1].rho;
            let layout = bank.layout();
            Some(
                bank.agents()
                    .iter()
                    .map(|a| {
                        let sec = layout.section(a.id);
                        let fd = &bank.models()[a.id].fd;
                        infer_mode(rho[sec.start], rho[sec.end() - 1], a.mode, &a.posterior.mean, fd)
                    })
                    .collect(),
            )
        }
    }
}

fn step_error(filter: FilterKind, k: usize) -> impl FnOnce(FilterError) -> HarnessError {
    move |source| HarnessError::Step { filter: filter.name().to_string(), k, agent: None, source }
}

/// Runs one filter over prepared inputs. `engines` enables the monitors
/// of the distributed variants.
pub fn run_filter(
    scenario: &Scenario,
    inputs: &RunInputs,
    kind: FilterKind,
    seed: u64,
    engines: Option<&[BoundEngine]>,
) -> Result<RunRecord, HarnessError> {
    let layout = scenario.layout()?;
    let sensors = scenario.sensor_layout(&layout)?;
    let selection = scenario.nees.selection;
    let mut steps = Vec::with_capacity(scenario.k_max);
    let mut violations = Vec::new();
    let wall = Instant::now();
    let agent_seconds = match kind {
        FilterKind::Lkf | FilterKind::Dlkcf0 | FilterKind::Dlkcf => {
            let variant = match kind {
                FilterKind::Lkf => Variant::Lkf,
                FilterKind::Dlkcf0 => Variant::Dlkcf0,
                _ => Variant::Dlkcf,
            };
            let f = &scenario.filter;
            let config = FilterConfig {
                variant,
                gamma_rule: f.gamma_rule,
                include_affine: f.include_affine,
                covariance_model: f.covariance_model,
                share_measurements: true,
            };
            let mut bank = DistributedFilter::new(
                layout.clone(),
                sensors,
                agent_models(scenario, &layout)?,
                initial_beliefs(scenario, &layout, &inputs.initial_mean)?,
                config,
                f.drops.clone(),
            )?;
            let mut monitors = engines.map(|e| Monitors::new(e, scenario.monitors.slack));
            for k in 1..=scenario.k_max {
                let before: Vec<DMatrix<f64>> = match monitors {
                    Some(_) => bank.agents().iter().map(|a| a.posterior.cov.clone()).collect(),
                    None => Vec::new(),
                };
                let scheduled = select_modes(scenario.filter.mode_source, &bank, inputs, k);
                let input = StepInput {
                    k,
                    readings: &inputs.readings[k - 1],
                    scheduled_modes: scheduled.as_deref(),
                    true_modes: Some(&inputs.true_modes[k - 1]),
                };
                bank.step(input).map_err(step_error(kind, k))?;
                let agents = bank.agents();
                if let Some(m) = monitors.as_mut() {
                    for a in agents {
                        m.check(k, a.id, a.mode.expect("mode set after a step"), &before[a.id], &a.posterior.cov, &a.gain)?;
                    }
                }
                let means = bank.estimates();
                let covs: Vec<&DMatrix<f64>> = agents.iter().map(|a| &a.posterior.cov).collect();
                let gains: Vec<&DMatrix<f64>> = agents.iter().map(|a| &a.gain).collect();
                steps.push(section_metrics(k, &layout, &inputs.truth.profiles[k].rho, &means, &covs, &gains, selection));
            }
            if let Some(m) = monitors {
                violations = m.violations;
            }
            bank.agent_times().iter().map(|d| d.as_secs_f64()).collect()
        }
        FilterKind::Central => {
            let n = layout.n_total();
            let single = PartitionLayout::uniform(n, 1, n, 0)?;
            let initial =
                Gaussian::new(DVector::from_column_slice(&inputs.initial_mean), DMatrix::identity(n, n) * scenario.filter.initial.std().powi(2))?;
            let mut kf = CentralKf::new(
                scenario.fd()?,
                scenario.grid(),
                scenario.process_noise(n),
                &sensors,
                initial,
                scenario.filter.central_model,
                scenario.filter.include_affine,
            )?;
            let none = DMatrix::zeros(0, 0);
            for k in 1..=scenario.k_max {
                kf.step(&inputs.readings[k - 1]).map_err(step_error(kind, k))?;
                let b = kf.belief();
                steps.push(section_metrics(
                    k,
                    &single,
                    &inputs.truth.profiles[k].rho,
                    std::slice::from_ref(&b.mean),
                    &[&b.cov],
                    &[&none],
                    selection,
                ));
            }
            vec![kf.elapsed().as_secs_f64()]
        }
        FilterKind::Optimal => {
            let f = &scenario.filter;
            let config = FilterConfig {
                variant: Variant::Dlkcf,
                gamma_rule: f.optimal_gamma_rule,
                include_affine: f.include_affine,
                covariance_model: f.covariance_model,
                share_measurements: true,
            };
            let mut filter = OptimalDlkcf::new(
                layout.clone(),
                sensors,
                agent_models(scenario, &layout)?,
                initial_beliefs(scenario, &layout, &inputs.initial_mean)?,
                config,
                f.optimal_cross_noise,
                f.optimal_guard,
            )?;
            let t = Instant::now();
            for k in 1..=scenario.k_max {
                let input = OptimalInput { k, readings: &inputs.readings[k - 1], modes: &inputs.true_modes[k - 1] };
                filter.step(input).map_err(step_error(kind, k))?;
                let covs: Vec<&DMatrix<f64>> = (0..layout.n_sections()).map(|i| filter.posterior().get(i, i)).collect();
                let gains: Vec<&DMatrix<f64>> = filter.gains().iter().collect();
                steps.push(section_metrics(
                    k,
                    &layout,
                    &inputs.truth.profiles[k].rho,
                    filter.means(),
                    &covs,
                    &gains,
                    selection,
                ));
            }
            let per = t.elapsed().as_secs_f64() / layout.n_sections() as f64;
            vec![per; layout.n_sections()]
        }
    };
    let timings = Timings { wall_seconds: wall.elapsed().as_secs_f64(), agent_seconds: agent_seconds.clone() };
    Ok(RunRecord {
        schema: SCENARIO_SCHEMA.to_string(),
        scenario_hash: scenario.hash(),
        filter: kind,
        seed,
        totals: RunMetrics::from_steps(&steps, agent_seconds),
        steps,
        bounds: Vec::new(),
        violations,
        timings,
    })
}

/// Runs every filter of the scenario on one seed.
///
/// When monitors are enabled the bound engines are built once and every
/// distributed record carries the per-section bound reports and any
/// violations.
pub fn run_experiment(scenario: &Scenario, seed: u64) -> Result<Vec<RunRecord>, HarnessError> {
    scenario.validate()?;
    let inputs = prepare(scenario, seed)?;
    let (engines, reports) = if scenario.monitors.enabled {
        let engines = section_engines(scenario)?;
        let reports = section_reports(scenario, &engines)?;
        (Some(engines), reports)
    } else {
        (None, Vec::new())
    };
    scenario
        .filters
        .iter()
        .map(|&kind| {
            let mut rec = run_filter(scenario, &inputs, kind, seed, engines.as_deref())?;
            if matches!(kind, FilterKind::Lkf | FilterKind::Dlkcf0 | FilterKind::Dlkcf) {
                rec.bounds = reports.clone();
            }
            Ok(rec)
        })
        .collect()
}
