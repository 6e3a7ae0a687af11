//! Multi-run studies: NEES consistency, the filter comparison table, the
//! Lyapunov decrease, unobservable-interval safety, the residence-time law
//! and the cross-covariance divergence demonstration.

use bounds::monitors::entry_time;
use bounds::{schedule_bounds, BoundConfig, BoundEngine, IntervalSchedule};
use ctm::{FundamentalDiagram, Grid};
use dlkcf::metrics::{gain_inf_norm, lyapunov, nees_region, NeesAccumulator};
use dlkcf::{
    AgentModel, DistributedFilter, DropPolicy, FilterConfig, Gaussian, GammaRule, OptimalDlkcf, OptimalInput,
    PartitionLayout, SensorLayout, SensorPlan, StepInput, Variant,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smm::{build_mode_matrices, observable_modes, Mode};

use crate::run::{prepare, run_filter};
use crate::scenario::{FilterKind, Scenario};
use crate::HarnessError;

fn normal<R: Rng>(rng: &mut R, std: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    std * z
}

fn step_err(name: &str, k: usize) -> impl FnOnce(dlkcf::FilterError) -> HarnessError + '_ {
    move |source| HarnessError::Step { filter: name.to_string(), k, agent: None, source }
}

/// NEES summary of one section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionNees {
    /// Section index.
    pub section: usize,
    /// Fraction of steps whose run-averaged NEES lies outside the region.
    pub violation_fraction: f64,
    /// Fraction above the upper limit.
    pub above: f64,
    /// Fraction below the lower limit.
    pub below: f64,
    /// Time average of the run-averaged NEES.
    pub mean: f64,
}

/// Result of the Monte Carlo NEES study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeesStudy {
    /// Monte Carlo runs.
    pub runs: usize,
    /// Degrees of freedom per section and run.
    pub dof: usize,
    /// Two-sided acceptance region of the run-averaged NEES.
    pub region: (f64, f64),
    /// Per-section summaries.
    pub sections: Vec<SectionNees>,
    /// Run-averaged NEES per section and step (after burn-in).
    pub averages: Vec<Vec<Option<f64>>>,
    /// Excluded (singular) values.
    pub excluded: usize,
}

impl NeesStudy {
    /// Largest per-section violation fraction.
    pub fn worst_fraction(&self) -> f64 {
        self.sections.iter().map(|s| s.violation_fraction).fold(0.0, f64::max)
    }
}

/// Runs `scenario.runs` seeds of the DLKCF and evaluates the NEES region.
pub fn nees_study(scenario: &Scenario) -> Result<NeesStudy, HarnessError> {
    scenario.validate()?;
    let layout = scenario.layout()?;
    let n_sec = layout.n_sections();
    let burn = scenario.nees.burn_in;
    let steps = scenario.k_max - burn;
    let accs: Vec<NeesAccumulator> = (0..scenario.runs as u64)
        .into_par_iter()
        .map(|r| {
            let seed = scenario.seed + r;
            let inputs = prepare(scenario, seed)?;
            let rec = run_filter(scenario, &inputs, scenario.nees.filter, seed, None)?;
            let mut acc = NeesAccumulator::new(n_sec, steps);
            for (idx, st) in rec.steps.iter().skip(burn).enumerate() {
                for (i, v) in st.nees.iter().enumerate() {
                    acc.add(i, idx, *v);
                }
            }
            Ok(acc)
        })
        .collect::<Result<_, HarnessError>>()?;
    let mut acc = NeesAccumulator::new(n_sec, steps);
    for a in &accs {
        acc.merge(a);
    }
    let dof = scenario.nees.dof(layout.dim(0));
    let region = nees_region(scenario.runs, dof, scenario.nees.probability)?;
    let averages: Vec<Vec<Option<f64>>> = (0..n_sec).map(|i| acc.averages(i)).collect();
    let sections = averages
        .iter()
        .enumerate()
        .map(|(i, avg)| {
            let vals: Vec<f64> = avg.iter().flatten().copied().collect();
            let m = vals.len().max(1) as f64;
            SectionNees {
                section: i,
                violation_fraction: acc.violation_fraction(i, region),
                above: vals.iter().filter(|&&v| v > region.1).count() as f64 / m,
                below: vals.iter().filter(|&&v| v < region.0).count() as f64 / m,
                mean: vals.iter().sum::<f64>() / m,
            }
        })
        .collect();
    Ok(NeesStudy { runs: scenario.runs, dof, region, sections, averages, excluded: acc.excluded() })
}

/// Totals of one filter in the comparison study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterTotals {
    /// Estimator.
    pub filter: FilterKind,
    /// Mean over seeds of `ũ = Σ_k ũ_k`.
    pub disagreement: Option<f64>,
    /// Mean over seeds of `η = Σ_k η_k`.
    pub error: f64,
    /// Per-seed `(ũ, η)`.
    pub per_seed: Vec<(Option<f64>, f64)>,
}

/// Runs every filter of the scenario on `seeds` consecutive seeds and
/// averages the run totals.
pub fn comparison_study(scenario: &Scenario, seeds: usize) -> Result<Vec<FilterTotals>, HarnessError> {
    scenario.validate()?;
    let per_seed: Vec<Vec<(Option<f64>, f64)>> = (0..seeds as u64)
        .into_par_iter()
        .map(|r| {
            let seed = scenario.seed + r;
            let inputs = prepare(scenario, seed)?;
            scenario
                .filters
                .iter()
                .map(|&kind| {
                    let rec = run_filter(scenario, &inputs, kind, seed, None)?;
                    Ok((rec.totals.disagreement, rec.totals.error))
                })
                .collect::<Result<Vec<_>, HarnessError>>()
        })
        .collect::<Result<_, HarnessError>>()?;
    Ok(scenario
        .filters
        .iter()
        .enumerate()
        .map(|(f, &kind)| {
            let vals: Vec<(Option<f64>, f64)> = per_seed.iter().map(|v| v[f]).collect();
            let m = vals.len() as f64;
            let disagreement = vals.iter().map(|v| v.0).sum::<Option<f64>>().map(|s| s / m);
            FilterTotals { filter: kind, disagreement, error: vals.iter().map(|v| v.1).sum::<f64>() / m, per_seed: vals }
        })
        .collect())
}

/// Settings of the noise-free Lyapunov study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpec {
    /// Number of sections.
    pub sections: usize,
    /// Cells per section.
    pub section_len: usize,
    /// Shared cells between neighbors.
    pub overlap: usize,
    /// Steps.
    pub steps: usize,
    /// Process noise standard deviation assumed by the filter.
    pub process_std: f64,
    /// Initial mean error standard deviation.
    pub initial_std: f64,
    /// Seed of the initial errors and the mode schedule.
    pub seed: u64,
}

impl Default for LyapunovSpec {
    fn default() -> Self {
        Self { sections: 7, section_len: 28, overlap: 10, steps: 800, process_std: 0.02, initial_std: 0.3, seed: 4 }
    }
}

/// Result of the Lyapunov study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovStudy {
    /// `V_k` for `k = 0..=steps`.
    pub v: Vec<f64>,
    /// `Σ γ‖u‖²` over links at each step `1..=steps`.
    pub rate: Vec<f64>,
    /// Steps where `V` failed to decrease strictly.
    pub increases: Vec<usize>,
    /// Steps where `ΔV ≥ −√2·Σγ‖u‖²`.
    pub rate_failures: Vec<usize>,
    /// Number of (step, link) pairs with a positive scaling factor.
    pub active_links: usize,
    /// `‖η̄_K‖ / ‖η̄_0‖` for the stacked mean error.
    pub terminal_ratio: f64,
}

/// Mean error dynamics of the DLKCF with `γ = 0.99·min{γ*, γ̂}` on a
/// multi-section road switching among observable modes.
///
/// The truth is zero, measurements are noise-free and the affine terms
/// are dropped, so the posterior mean equals the mean estimation error.
pub fn lyapunov_study(spec: &LyapunovSpec) -> Result<LyapunovStudy, HarnessError> {
    let n_total = spec.sections * spec.section_len - (spec.sections - 1) * spec.overlap;
    let layout = PartitionLayout::uniform(n_total, spec.sections, spec.section_len, spec.overlap)?;
    let n = spec.section_len;
    let plan = SensorPlan { positions: vec![0, n / 2 - 1, n / 2 + 1, n - 1], ..SensorPlan::default() };
    let sensors = SensorLayout::from_plan(&layout, &plan)?;
    let fd = FundamentalDiagram::normalized();
    let grid = Grid { dx: 1.0, dt: 0.5, n_cells: n };
    let q = DMatrix::identity(n, n) * spec.process_std.powi(2);
    let models = vec![AgentModel { fd, grid, q: q.clone() }; spec.sections];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let initial: Vec<Gaussian> = (0..spec.sections)
        .map(|_| {
            let mean = DVector::from_fn(n, |_, _| normal(&mut rng, spec.initial_std));
            Gaussian::new(mean, DMatrix::identity(n, n) * 0.05)
        })
        .collect::<Result<_, _>>()?;
    let config = FilterConfig {
        variant: Variant::Dlkcf,
        gamma_rule: GammaRule::Bounded { backoff: 0.99, c_hat: 0.01 },
        include_affine: false,
        covariance_model: Default::default(),
        share_measurements: true,
    };
    let mut bank = DistributedFilter::new(layout.clone(), sensors, models, initial, config, DropPolicy::None)?;
    let zeros = vec![0.0; bank.sensors().len()];
    let covs = |b: &DistributedFilter| b.agents().iter().map(|a| a.posterior.cov.clone()).collect::<Vec<_>>();
    let stacked = |b: &DistributedFilter| b.estimates().iter().map(|e| e.norm_squared()).sum::<f64>().sqrt();
    let mut v = vec![lyapunov(&bank.estimates(), &covs(&bank))?];
    let e0 = stacked(&bank);
    let (mut rate, mut increases, mut rate_failures, mut active_links) = (Vec::new(), Vec::new(), Vec::new(), 0);
    for k in 1..=spec.steps {
        let modes: Vec<Mode> = (0..spec.sections)
            .map(|i| {
                let all = observable_modes(layout.dim(i));
                all[rng.gen_range(0..all.len())]
            })
            .collect();
        bank.step(StepInput { k, readings: &zeros, scheduled_modes: Some(&modes), true_modes: None })
            .map_err(step_err("dlkcf", k))?;
        let vk = lyapunov(&bank.estimates(), &covs(&bank))?;
        let mut r = 0.0;
        for a in bank.agents() {
            for link in a.links.iter().filter(|l| l.neighbor > a.id) {
                if let Some(u) = &link.disagreement {
                    r += link.gamma * u.norm_squared();
                }
                if link.gamma > 0.0 {
                    active_links += 1;
                }
            }
        }
        let prev = *v.last().expect("nonempty");
        // Relative roundoff allowance of the two quadratic forms.
        let tol = 1e-12 * prev;
        if vk >= prev + tol {
            increases.push(k);
        }
        if vk - prev >= -std::f64::consts::SQRT_2 * r + tol {
            rate_failures.push(k);
        }
        rate.push(r);
        v.push(vk);
    }
    Ok(LyapunovStudy { terminal_ratio: stacked(&bank) / e0, v, rate, increases, rate_failures, active_links })
}

/// Builds a one-section bank whose only sensors sit on the boundary cells.
fn single_section(
    n: usize,
    fd: FundamentalDiagram,
    q: f64,
    r_std: f64,
    initial: Gaussian,
) -> Result<DistributedFilter, HarnessError> {
    let layout = PartitionLayout::uniform(n, 1, n, 0)?;
    let plan = SensorPlan { positions: vec![0, n - 1], std: r_std, ..SensorPlan::default() };
    let sensors = SensorLayout::from_plan(&layout, &plan)?;
    let model = AgentModel { fd, grid: Grid { dx: 1.0, dt: 0.5, n_cells: n }, q: DMatrix::identity(n, n) * q };
    let config = FilterConfig { variant: Variant::Lkf, ..FilterConfig::default() };
    Ok(DistributedFilter::new(layout, sensors, vec![model], vec![initial], config, DropPolicy::None)?)
}

fn section_bound_config(n: usize, fd: FundamentalDiagram, q: f64, r: f64, seed: u64) -> BoundConfig {
    BoundConfig { n, fd, q1: q / 2.0, q2: q * 2.0, r1: r / 2.0, r2: r * 2.0, seed, ..BoundConfig::normalized(n) }
}

/// Settings of the unobservable-interval study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnobservableSpec {
    /// Section size.
    pub n: usize,
    /// Cells upstream of the stationary shock.
    pub shock: usize,
    /// Freeflow density upstream of the shock.
    pub rho_free: f64,
    /// Steps per run (the entry-time cap).
    pub steps: usize,
    /// Monte Carlo runs.
    pub runs: usize,
    /// Process noise variance assumed by the filter.
    pub q: f64,
    /// Measurement noise standard deviation.
    pub r_std: f64,
    /// Relative tolerance `ε/ϱ_m` of the ultimate bound.
    pub band: f64,
    /// Base seed.
    pub seed: u64,
}

impl Default for UnobservableSpec {
    fn default() -> Self {
        Self { n: 8, shock: 4, rho_free: 0.15, steps: 5000, runs: 50, q: 4e-4, r_std: 0.03, band: 0.05, seed: 100 }
    }
}

/// Result of the unobservable-interval study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnobservableStudy {
    /// Mode labelled from the true densities.
    pub mode: Mode,
    /// Per-run entry time into `[−ε, ϱ_m+ε]` (`None` if never entered for good).
    pub entry: Vec<Option<usize>>,
    /// Norm of the Monte Carlo mean error per step `0..=steps`.
    pub mean_error: Vec<f64>,
    /// `ε` used for the mean-error bound (the initial mean error norm).
    pub entering_error: f64,
    /// `𝔥(ε, Γ₀)`.
    pub frak_h: f64,
    /// Largest `‖K‖_∞` over runs and steps.
    pub max_gain: f64,
    /// `𝔨(Γ₀)`.
    pub frak_k: f64,
    /// Steps where the mean error norm exceeded `𝔥`.
    pub error_violations: usize,
    /// (run, step) pairs where `‖K‖_∞ > 𝔨`.
    pub gain_violations: usize,
}

impl UnobservableStudy {
    /// True when every run entered the band within the horizon.
    pub fn all_entered(&self) -> bool {
        self.entry.iter().all(Option::is_some)
    }
}

/// A section held in a freeflow-to-congested mode with a stationary shock.
///
/// The truth is a CTM-consistent stationary shock (equal flux on both
/// sides), measured at the boundary cells. The filter starts with interior
/// estimates far outside the physical range. The boundary classes come from
/// the true boundary densities, so the section stays unobservable, while the
/// shock cell and direction follow the agent's own prior estimate.
pub fn unobservable_study(spec: &UnobservableSpec) -> Result<UnobservableStudy, HarnessError> {
    let fd = FundamentalDiagram::normalized();
    let n = spec.n;
    let flux = fd.v_m * spec.rho_free;
    let rho_cong = fd.rho_m - flux / fd.w;
    let truth: Vec<f64> = (0..n).map(|l| if l < spec.shock { spec.rho_free } else { rho_cong }).collect();
    let mode = smm::label_mode(&DVector::from_vec(truth.clone()), &fd).mode;
    if mode.is_observable() {
        return Err(HarnessError::Scenario(format!("stationary shock is labelled {mode:?}, not an unobservable mode")));
    }
    let init_mean: Vec<f64> = (0..n)
        .map(|l| if l == 0 || l == n - 1 { truth[l] } else if l % 2 == 0 { -0.4 * fd.rho_m } else { 1.4 * fd.rho_m })
        .collect();
    let gamma0 = DMatrix::identity(n, n) * 0.05f64.powi(2);
    let engine = BoundEngine::new(section_bound_config(n, fd, spec.q, spec.r_std.powi(2), spec.seed))?;
    let entering_error = init_mean.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let frak_h = engine.unobservable_bound(entering_error, &gamma0)?;
    let frak_k = engine.gain_bound(&gamma0)?;
    let eps = spec.band * fd.rho_m;

    struct RunOut {
        entry: Option<usize>,
        errors: Vec<DVector<f64>>,
        max_gain: f64,
        gain_violations: usize,
    }
    let outs: Vec<RunOut> = (0..spec.runs as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed + r);
            let initial = Gaussian::new(DVector::from_vec(init_mean.clone()), gamma0.clone())?;
            let mut bank = single_section(n, fd, spec.q, spec.r_std, initial)?;
            let truth_v = DVector::from_vec(truth.clone());
            let mut estimates = vec![init_mean.clone()];
            let mut errors = vec![DVector::from_vec(init_mean.clone()) - &truth_v];
            let (mut max_gain, mut gain_violations) = (0.0_f64, 0);
            for k in 1..=spec.steps {
                let readings = [truth[0] + normal(&mut rng, spec.r_std), truth[n - 1] + normal(&mut rng, spec.r_std)];
                let prev = &bank.agents()[0];
                let scheduled = smm::infer_mode(truth[0], truth[n - 1], prev.mode, &prev.posterior.mean, &fd);
                if scheduled.is_observable() {
                    return Err(HarnessError::Scenario(format!("step {k}: inferred mode {scheduled:?} is observable")));
                }
                bank.step(StepInput { k, readings: &readings, scheduled_modes: Some(&[scheduled]), true_modes: None })
                    .map_err(step_err("lkf", k))?;
                let a = &bank.agents()[0];
                let g = gain_inf_norm(&a.gain);
                max_gain = max_gain.max(g);
                if !(g <= frak_k) {
                    gain_violations += 1;
                }
                estimates.push(a.posterior.mean.iter().copied().collect());
                errors.push(&a.posterior.mean - &truth_v);
            }
            let entry = entry_time(estimates.iter().map(|v| v.as_slice()), -eps, fd.rho_m + eps);
            Ok(RunOut { entry, errors, max_gain, gain_violations })
        })
        .collect::<Result<_, HarnessError>>()?;
    let runs = outs.len() as f64;
    let mean_error: Vec<f64> = (0..=spec.steps)
        .map(|k| (outs.iter().map(|o| &o.errors[k]).fold(DVector::zeros(n), |acc, e| acc + e) / runs).norm())
        .collect();
    Ok(UnobservableStudy {
        mode,
        entry: outs.iter().map(|o| o.entry).collect(),
        error_violations: mean_error.iter().filter(|&&e| !(e <= frak_h)).count(),
        mean_error,
        entering_error,
        frak_h,
        max_gain: outs.iter().map(|o| o.max_gain).fold(0.0, f64::max),
        frak_k,
        gain_violations: outs.iter().map(|o| o.gain_violations).sum(),
    })
}

/// Settings of the residence-time study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidenceSpec {
    /// Section size.
    pub n: usize,
    /// Steps per observable block.
    pub observable_len: usize,
    /// Steps per unobservable block.
    pub unobservable_len: usize,
    /// Number of (observable, unobservable) block pairs.
    pub cycles: usize,
    /// Monte Carlo runs.
    pub runs: usize,
    /// Process noise variance (truth and filter).
    pub q: f64,
    /// Measurement noise standard deviation.
    pub r_std: f64,
    /// Initial mean error per cell.
    pub initial_error: f64,
    /// Base seed.
    pub seed: u64,
}

impl Default for ResidenceSpec {
    fn default() -> Self {
        Self { n: 5, observable_len: 40, unobservable_len: 20, cycles: 5, runs: 50, q: 4e-4, r_std: 0.03, initial_error: 0.2, seed: 200 }
    }
}

/// Result of the residence-time study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidenceStudy {
    /// Mode active at each step `1..=K`.
    pub modes: Vec<Mode>,
    /// Per-interval residence requirements and caps.
    pub bounds: bounds::ScheduleBounds,
    /// Norm of the Monte Carlo mean error per step `0..=K`.
    pub mean_error: Vec<f64>,
    /// Steps where the mean error exceeded the interval cap.
    pub violations: Vec<usize>,
}

/// Alternating observable/unobservable schedule on the linear switching
/// model: the truth follows the scheduled SMM with process noise, the filter
/// knows the schedule, and the Monte Carlo mean error is compared with the
/// per-interval caps.
pub fn residence_study(spec: &ResidenceSpec) -> Result<ResidenceStudy, HarnessError> {
    let fd = FundamentalDiagram::normalized();
    let n = spec.n;
    let grid = Grid { dx: 1.0, dt: 0.5, n_cells: n };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let obs = observable_modes(n);
    let unobs: Vec<Mode> = smm::all_modes(n).into_iter().filter(|m| !m.is_observable()).collect();
    let mut modes = Vec::new();
    for _ in 0..spec.cycles {
        let m = obs[rng.gen_range(0..obs.len())];
        modes.extend(std::iter::repeat(m).take(spec.observable_len));
        let m = unobs[rng.gen_range(0..unobs.len())];
        modes.extend(std::iter::repeat(m).take(spec.unobservable_len));
    }
    let horizon = modes.len();
    let matrices: Vec<_> =
        modes.iter().map(|&m| build_mode_matrices(m, n, &fd, &grid)).collect::<Result<Vec<_>, _>>().map_err(dlkcf::FilterError::from)?;
    let x0 = DVector::from_element(n, 0.4 * fd.rho_m);
    let gamma0 = DMatrix::identity(n, n) * spec.initial_error.powi(2);
    let init_mean = x0.add_scalar(spec.initial_error);

    let run = |seed: Option<u64>| -> Result<(Vec<DVector<f64>>, Vec<DMatrix<f64>>), HarnessError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
        let mut bank = single_section(n, fd, spec.q, spec.r_std, Gaussian::new(init_mean.clone(), gamma0.clone())?)?;
        let mut x = x0.clone();
        let mut errors = vec![&init_mean - &x];
        let mut covs = vec![gamma0.clone()];
        for k in 1..=horizon {
            let m = &matrices[k - 1];
            x = &m.a * &x + m.affine(&fd);
            if seed.is_some() {
                x += DVector::from_fn(n, |_, _| normal(&mut rng, spec.q.sqrt()));
            }
            let noise = |rng: &mut ChaCha8Rng| if seed.is_some() { normal(rng, spec.r_std) } else { 0.0 };
            let readings = [x[0] + noise(&mut rng), x[n - 1] + noise(&mut rng)];
            bank.step(StepInput { k, readings: &readings, scheduled_modes: Some(&modes[k - 1..k]), true_modes: None })
                .map_err(step_err("lkf", k))?;
            let a = &bank.agents()[0];
            errors.push(&a.posterior.mean - &x);
            covs.push(a.posterior.cov.clone());
        }
        Ok((errors, covs))
    };
    let (_, gammas) = run(None)?;
    let engine = BoundEngine::new(section_bound_config(n, fd, spec.q, spec.r_std.powi(2), spec.seed))?;
    let schedule = IntervalSchedule::from_modes(&modes)?;
    let caps = schedule_bounds(&engine, &schedule, &gammas, engine.config().delta)?;
    let runs: Vec<Vec<DVector<f64>>> = (0..spec.runs as u64)
        .into_par_iter()
        .map(|r| run(Some(spec.seed + 1 + r)).map(|o| o.0))
        .collect::<Result<_, HarnessError>>()?;
    let m = runs.len() as f64;
    let mean_error: Vec<f64> = (0..=horizon)
        .map(|k| (runs.iter().map(|e| &e[k]).fold(DVector::zeros(n), |acc, e| acc + e) / m).norm())
        .collect();
    let violations = (1..=horizon)
        .filter(|&k| caps.cap_at(k).map_or(true, |cap| !(mean_error[k] <= cap)))
        .collect();
    Ok(ResidenceStudy { modes, bounds: caps, mean_error, violations })
}

/// Settings of the divergence demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSpec {
    /// Cells per section.
    pub n: usize,
    /// Shared cells.
    pub overlap: usize,
    /// Mode of the first section before the switch.
    pub unobservable_mode: Mode,
    /// Switching times to evaluate.
    pub k0: Vec<usize>,
    /// `κ` of the prior-normalized scaling factor.
    pub kappa: f64,
    /// Process noise variance.
    pub q: f64,
    /// Measurement noise standard deviation.
    pub r_std: f64,
    /// Initial covariance `var·I` of both sections.
    pub initial_var: f64,
    /// Steps the suboptimal filter runs after the last switching time.
    pub tail: usize,
}

impl Default for DivergenceSpec {
    fn default() -> Self {
        Self {
            n: 4,
            overlap: 2,
            unobservable_mode: Mode::fc1(2),
            k0: vec![10, 100, 1000, 5000, 20000],
            kappa: 0.5,
            q: 0.01,
            r_std: 0.03,
            initial_var: 1e-3,
            tail: 50,
        }
    }
}

/// Result of the divergence demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceStudy {
    /// `‖Γ₂,0‖`.
    pub initial_norm: f64,
    /// `(k₀, ‖Γ₂,k₀|k₀‖)` of the cross-covariance-tracking filter.
    pub optimal: Vec<(usize, f64)>,
    /// Largest `‖Γ₂,k|k‖` of the suboptimal DLKCF over the longest run.
    pub suboptimal_max: f64,
    /// Uniform cap `1/𝔠₁(Γ₂,0)` on `‖Γ₂‖` of an always-observable section.
    pub cap: f64,
}

impl DivergenceStudy {
    /// Largest growth factor `‖Γ₂,k₀|k₀‖/‖Γ₂,0‖` of the optimal filter.
    pub fn optimal_growth(&self) -> f64 {
        self.optimal.iter().map(|p| p.1).fold(0.0, f64::max) / self.initial_norm
    }
}

fn spectral(m: &DMatrix<f64>) -> f64 {
    nalgebra::SymmetricEigen::new(m.clone()).eigenvalues.amax()
}

/// Two sections; the second is always congested, the first is held in an
/// unobservable mode until `k₀` and congested afterwards. The
/// cross-covariance-tracking filter and the suboptimal DLKCF share the
/// prior-normalized scaling rule.
pub fn divergence_study(spec: &DivergenceSpec) -> Result<DivergenceStudy, HarnessError> {
    let n = spec.n;
    let n_total = 2 * n - spec.overlap;
    let layout = PartitionLayout::uniform(n_total, 2, n, spec.overlap)?;
    let plan = SensorPlan { positions: vec![0, n - 1], std: spec.r_std, ..SensorPlan::default() };
    let sensors = SensorLayout::from_plan(&layout, &plan)?;
    let fd = FundamentalDiagram::normalized();
    let model = AgentModel { fd, grid: Grid { dx: 1.0, dt: 0.5, n_cells: n }, q: DMatrix::identity(n, n) * spec.q };
    let gamma0 = DMatrix::identity(n, n) * spec.initial_var;
    let initial = || -> Result<Vec<Gaussian>, HarnessError> {
        Ok(vec![Gaussian::new(DVector::zeros(n), gamma0.clone())?, Gaussian::new(DVector::zeros(n), gamma0.clone())?])
    };
    let config = FilterConfig {
        variant: Variant::Dlkcf,
        gamma_rule: GammaRule::PriorNormalized { kappa: spec.kappa },
        include_affine: false,
        covariance_model: Default::default(),
        share_measurements: false,
    };
    let modes_at = |k: usize, k0: usize| [if k < k0 { spec.unobservable_mode } else { Mode::cc() }, Mode::cc()];
    let zeros = vec![0.0; sensors.len()];
    let optimal = spec
        .k0
        .par_iter()
        .map(|&k0| {
            let mut f = OptimalDlkcf::new(layout.clone(), sensors.clone(), vec![model.clone(); 2], initial()?, config, false, f64::MAX)?;
            for k in 1..=k0 {
                f.step(OptimalInput { k, readings: &zeros, modes: &modes_at(k, k0) }).map_err(step_err("optimal", k))?;
            }
            Ok((k0, spectral(f.posterior().get(1, 1))))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let k0 = spec.k0.iter().copied().max().unwrap_or(0);
    let mut bank = DistributedFilter::new(layout.clone(), sensors.clone(), vec![model.clone(); 2], initial()?, config, DropPolicy::None)?;
    let mut suboptimal_max = spectral(&gamma0);
    for k in 1..=k0 + spec.tail {
        let modes = modes_at(k, k0);
        bank.step(StepInput { k, readings: &zeros, scheduled_modes: Some(&modes), true_modes: None })
            .map_err(step_err("dlkcf", k))?;
        suboptimal_max = suboptimal_max.max(spectral(&bank.agents()[1].posterior.cov));
    }
    let r = spec.r_std.powi(2);
    let engine = BoundEngine::new(section_bound_config(n, fd, spec.q, r, 0))?;
    let (c1, _) = engine.information_bounds(&gamma0)?;
    Ok(DivergenceStudy { initial_norm: spectral(&gamma0), optimal, suboptimal_max, cap: 1.0 / c1 })
}
