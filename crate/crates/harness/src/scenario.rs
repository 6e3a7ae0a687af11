//! Experiment scenarios: JSON schema, defaults and validation.
//!
//! Every field carries a default so that `{}` is a complete scenario (the
//! seven-section heterogeneous-sensor study). Unknown fields are rejected.

use std::path::Path;

use ctm::{BoundarySpec, FdSpec, FundamentalDiagram, Grid, InitialProfile, TruthScenario};
use dlkcf::metrics::NeesSelection;
use dlkcf::{CentralModel, CovarianceModel, DropPolicy, GammaRule, PartitionLayout, SensorLayout, SensorPlan};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

/// Schema identifier written into scenario files and every emitted artifact.
pub const SCENARIO_SCHEMA: &str = "dlkcf-scenario/1";

/// Ground-truth road.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthSpec {
    /// True fundamental diagram.
    pub fd: FdSpec,
    /// Cell length.
    pub dx: f64,
    /// Time step.
    pub dt: f64,
    /// Initial density field over the whole road.
    pub initial: InitialProfile,
    /// Ghost-cell signals at both road ends.
    pub boundary: BoundarySpec,
    /// Standard deviation of additive noise on the true densities.
    pub model_noise_std: f64,
}

impl Default for TruthSpec {
    fn default() -> Self {
        Self::shock_and_fan(PartitionSpec::default().n_total())
    }
}

impl TruthSpec {
    /// The shock-and-fan road of `n_cells` cells without model noise.
    pub fn shock_and_fan(n_cells: usize) -> Self {
        let base = TruthScenario::shock_and_fan(n_cells);
        Self {
            fd: base.fd.spec(),
            dx: base.grid.dx,
            dt: base.grid.dt,
            initial: base.initial,
            boundary: base.boundary,
            model_noise_std: base.model_noise_std,
        }
    }
}

/// Uniform partition of the road into overlapping sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSpec {
    /// Number of sections `N`.
    pub sections: usize,
    /// Cells per section `n_l`.
    pub section_len: usize,
    /// Cells shared by two neighbors `n̂`.
    pub overlap: usize,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        Self { sections: 7, section_len: 28, overlap: 10 }
    }
}

impl PartitionSpec {
    /// Road length implied by the partition.
    pub fn n_total(&self) -> usize {
        self.sections * self.section_len - self.sections.saturating_sub(1) * self.overlap
    }
}

/// Relative perturbation of each section's believed fundamental diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSpec {
    /// Whether agents use perturbed parameters.
    pub enabled: bool,
    /// Smallest relative change.
    pub min: f64,
    /// Largest relative change.
    pub max: f64,
    /// Seed of the perturbation draw (fixed across Monte Carlo runs).
    pub seed: u64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self { enabled: true, min: 0.1, max: 0.2, seed: 7 }
    }
}

/// How the initial belief of every filter is formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialBelief {
    /// Truth plus Gaussian noise of standard deviation `std`, covariance `std²·I`.
    Perturbed { std: f64 },
    /// Every cell at `value`, covariance `std²·I`.
    Uniform { value: f64, std: f64 },
}

impl Default for InitialBelief {
    fn default() -> Self {
        InitialBelief::Perturbed { std: 0.05 }
    }
}

impl InitialBelief {
    /// Standard deviation of the initial covariance.
    pub fn std(&self) -> f64 {
        match *self {
            InitialBelief::Perturbed { std } | InitialBelief::Uniform { std, .. } => std,
        }
    }
}

/// Estimators that can be run on a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    /// Independent local KFs.
    Lkf,
    /// Shared sensors without consensus.
    Dlkcf0,
    /// Shared sensors with consensus.
    Dlkcf,
    /// Centralized KF over the whole road.
    Central,
    /// DLKCF tracking every cross-covariance.
    Optimal,
}

impl FilterKind {
    /// Lower-case name used in file names and logs.
    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::Lkf => "lkf",
            FilterKind::Dlkcf0 => "dlkcf0",
            FilterKind::Dlkcf => "dlkcf",
            FilterKind::Central => "central",
            FilterKind::Optimal => "optimal",
        }
    }
}

/// Where the distributed agents take their mode from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModeSource {
    /// Classify the previous step's raw boundary readings.
    #[default]
    Measured,
    /// Classify the previous step's true boundary densities; the transition
    /// index and shock direction still come from the agent's own estimate.
    ExactBoundary,
    /// Use the mode labelled from the true section densities.
    True,
}

/// Estimator settings shared by all filters of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    /// Process noise standard deviation; `Q = std²·I`.
    pub process_std: f64,
    /// Initial belief.
    pub initial: InitialBelief,
    /// Scaling-factor rule of the DLKCF.
    pub gamma_rule: GammaRule,
    /// Scaling-factor rule of the cross-covariance-tracking filter (fixed or prior-normalized).
    pub optimal_gamma_rule: GammaRule,
    /// Model noise correlation on shared cells in the cross-covariance-tracking filter.
    pub optimal_cross_noise: bool,
    /// Norm guard of the cross-covariance-tracking filter.
    pub optimal_guard: f64,
    /// Propagate the affine inflow/outflow terms.
    pub include_affine: bool,
    /// Matrix used for covariance prediction.
    pub covariance_model: CovarianceModel,
    /// Mode selection of the distributed agents.
    pub mode_source: ModeSource,
    /// Dynamics of the central KF.
    pub central_model: CentralModel,
    /// Data packet loss.
    pub drops: DropPolicy,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            process_std: 0.02,
            initial: InitialBelief::default(),
            gamma_rule: GammaRule::default(),
            optimal_gamma_rule: GammaRule::PriorNormalized { kappa: 0.5 },
            optimal_cross_noise: false,
            optimal_guard: 1e12,
            include_affine: true,
            covariance_model: CovarianceModel::Inferred,
            mode_source: ModeSource::Measured,
            central_model: CentralModel::Linearized,
            drops: DropPolicy::None,
        }
    }
}

/// NEES evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeesSpec {
    /// Cells entering the statistic.
    pub selection: NeesSelection,
    /// Probability mass of the two-sided acceptance region.
    pub probability: f64,
    /// Steps excluded from the violation count at the start of a run.
    pub burn_in: usize,
    /// Estimator whose covariance is tested.
    pub filter: FilterKind,
}

impl Default for NeesSpec {
    fn default() -> Self {
        Self { selection: NeesSelection::Boundary, probability: 0.95, burn_in: 0, filter: FilterKind::Dlkcf }
    }
}

impl NeesSpec {
    /// Degrees of freedom per section and run for a section of `n` cells.
    pub fn dof(&self, n: usize) -> usize {
        self.selection.indices(n).len()
    }
}

/// Invariant monitors attached to the distributed filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorSpec {
    /// Whether monitors run.
    pub enabled: bool,
    /// Noise brackets are `[v/bracket, v·bracket]` around the nominal variances.
    pub bracket: f64,
    /// Relative eigenvalue slack of the information monitor.
    pub slack: f64,
    /// `ε` of the unobservable-interval error bound.
    pub epsilon: f64,
    /// `δ` of the switching error bound.
    pub delta: f64,
    /// Largest section size with exhaustive sequence enumeration.
    pub exhaustive_limit: usize,
    /// Sampled sequences above the exhaustive limit.
    pub samples: usize,
}

impl Default for MonitorSpec {
    fn default() -> Self {
        Self { enabled: false, bracket: 2.0, slack: 1e-9, epsilon: 0.05, delta: 0.05, exhaustive_limit: 6, samples: 2000 }
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Schema identifier; must equal [`SCENARIO_SCHEMA`].
    pub schema: String,
    /// Free-form label.
    pub name: String,
    /// Ground truth.
    pub truth: TruthSpec,
    /// Partition.
    pub partition: PartitionSpec,
    /// Sensor placement, heterogeneous sensors and inconsistent agents.
    pub sensors: SensorPlan,
    /// Model parameter perturbation of the agents.
    pub perturbation: PerturbationSpec,
    /// Filter settings.
    pub filter: FilterSpec,
    /// Filters to run.
    pub filters: Vec<FilterKind>,
    /// Number of estimation steps.
    pub k_max: usize,
    /// Monte Carlo runs of the `nees` study.
    pub runs: usize,
    /// Base seed; run `r` of a study uses `seed + r`.
    pub seed: u64,
    /// NEES settings.
    pub nees: NeesSpec,
    /// Bound monitors.
    pub monitors: MonitorSpec,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            schema: SCENARIO_SCHEMA.to_string(),
            name: "seven-section".to_string(),
            truth: TruthSpec::default(),
            partition: PartitionSpec::default(),
            sensors: SensorPlan { heterogeneous: true, ..SensorPlan::default() },
            perturbation: PerturbationSpec::default(),
            filter: FilterSpec::default(),
            filters: vec![FilterKind::Lkf, FilterKind::Dlkcf0, FilterKind::Dlkcf],
            k_max: 400,
            runs: 50,
            seed: 1,
            nees: NeesSpec::default(),
            monitors: MonitorSpec::default(),
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), HarnessError> {
    if ok {
        Ok(())
    } else {
        Err(HarnessError::Scenario(msg()))
    }
}

impl Scenario {
    /// Reads and validates a scenario file.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
        let scenario: Scenario =
            serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.into(), source })?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Parses and validates a scenario from a JSON string.
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|source| HarnessError::Json { path: "<string>".into(), source })?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Pretty JSON of the scenario with 17-significant-digit floats.
    pub fn to_json(&self) -> String {
        crate::emit::to_json(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("scenario serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// True fundamental diagram.
    pub fn fd(&self) -> Result<FundamentalDiagram, HarnessError> {
        let s = self.truth.fd;
        FundamentalDiagram::new(s.v_m, s.rho_m, s.rho_c)
            .map_err(|e| HarnessError::Scenario(format!("truth.fd: {e}")))
    }

    /// Road grid.
    pub fn grid(&self) -> Grid {
        Grid { dx: self.truth.dx, dt: self.truth.dt, n_cells: self.partition.n_total() }
    }

    /// Ground-truth generator.
    pub fn truth_scenario(&self) -> Result<TruthScenario, HarnessError> {
        Ok(TruthScenario {
            fd: self.fd()?,
            grid: self.grid(),
            initial: self.truth.initial.clone(),
            boundary: self.truth.boundary.clone(),
            model_noise_std: self.truth.model_noise_std,
        })
    }

    /// Partition layout.
    pub fn layout(&self) -> Result<PartitionLayout, HarnessError> {
        let p = self.partition;
        PartitionLayout::uniform(p.n_total(), p.sections, p.section_len, p.overlap)
            .map_err(|e| HarnessError::Scenario(format!("partition: {e}")))
    }

    /// Sensor layout.
    pub fn sensor_layout(&self, layout: &PartitionLayout) -> Result<SensorLayout, HarnessError> {
        SensorLayout::from_plan(layout, &self.sensors).map_err(|e| HarnessError::Scenario(format!("sensors: {e}")))
    }

    /// Process noise covariance for a section of `n` cells.
    pub fn process_noise(&self, n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n) * self.filter.process_std.powi(2)
    }

    /// Fundamental diagram each section's agent believes.
    ///
    /// With perturbations enabled every parameter is scaled by `1 ± u`,
    /// `u ~ U[min, max]` with a random sign; draws that break `ρ_c < ρ_m` or
    /// the CFL condition are redrawn.
    pub fn agent_diagrams(&self) -> Result<Vec<FundamentalDiagram>, HarnessError> {
        let base = self.fd()?;
        let n = self.partition.sections;
        if !self.perturbation.enabled {
            return Ok(vec![base; n]);
        }
        let p = self.perturbation;
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let grid = self.grid();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut attempt = 0;
            loop {
                let mut factor = || {
                    let u = if p.max > p.min { rng.gen_range(p.min..=p.max) } else { p.min };
                    if rng.gen_bool(0.5) {
                        1.0 + u
                    } else {
                        1.0 - u
                    }
                };
                let (fv, fm, fc) = (factor(), factor(), factor());
                let cand = FundamentalDiagram::new(base.v_m * fv, base.rho_m * fm, base.rho_c * fc);
                if let Ok(fd) = cand {
                    if grid.check_cfl(&fd).is_ok() {
                        out.push(fd);
                        break;
                    }
                }
                attempt += 1;
                if attempt >= 100 {
                    return Err(HarnessError::Scenario(format!(
                        "perturbation: no admissible diagram for section {i} after 100 draws"
                    )));
                }
            }
        }
        Ok(out)
    }

    /// Checks every field and their mutual consistency.
    pub fn validate(&self) -> Result<(), HarnessError> {
        check(self.schema == SCENARIO_SCHEMA, || {
            format!("schema must be \"{SCENARIO_SCHEMA}\", got \"{}\"", self.schema)
        })?;
        let fd = self.fd()?;
        let grid = self.grid();
        grid.validate().map_err(|e| HarnessError::Scenario(format!("truth grid: {e}")))?;
        grid.check_cfl(&fd).map_err(|e| HarnessError::Scenario(format!("truth: {e}")))?;
        let p = self.partition;
        check(p.sections >= 1, || "partition.sections must be at least 1".into())?;
        check(p.section_len >= 2, || format!("partition.section_len must be at least 2, got {}", p.section_len))?;
        check(p.sections == 1 || p.overlap >= 1, || "partition.overlap must be at least 1 with several sections".into())?;
        check(p.overlap < p.section_len, || {
            format!("partition.overlap {} must be smaller than section_len {}", p.overlap, p.section_len)
        })?;
        let layout = self.layout()?;
        let n_local = p.section_len;
        if let Some(&bad) = self.sensors.positions.iter().find(|&&x| x >= n_local) {
            return Err(HarnessError::Scenario(format!(
                "sensors.positions: local index {bad} is outside a section of {n_local} cells"
            )));
        }
        self.sensor_layout(&layout)?;
        self.truth_scenario()?.validate().map_err(|e| HarnessError::Scenario(format!("truth: {e}")))?;
        let pert = self.perturbation;
        check(pert.min >= 0.0 && pert.min <= pert.max && pert.max < 1.0, || {
            format!("perturbation range [{}, {}] must satisfy 0 <= min <= max < 1", pert.min, pert.max)
        })?;
        self.agent_diagrams()?;
        let f = &self.filter;
        check(f.process_std.is_finite() && f.process_std > 0.0, || {
            format!("filter.process_std must be positive, got {}", f.process_std)
        })?;
        check(f.initial.std().is_finite() && f.initial.std() > 0.0, || "filter.initial.std must be positive".into())?;
        f.gamma_rule.validate().map_err(|e| HarnessError::Scenario(format!("filter.gamma_rule: {e}")))?;
        check(
            matches!(f.optimal_gamma_rule, GammaRule::Fixed { .. } | GammaRule::PriorNormalized { .. }),
            || "filter.optimal_gamma_rule must be fixed or prior_normalized".into(),
        )?;
        if let DropPolicy::Random { p, .. } = f.drops {
            check((0.0..=1.0).contains(&p), || format!("filter.drops.p must lie in [0, 1], got {p}"))?;
        }
        check(!self.filters.is_empty(), || "filters must name at least one estimator".into())?;
        check(self.k_max >= 1, || "k_max must be at least 1".into())?;
        check(self.runs >= 2, || format!("runs must be at least 2 for NEES regions, got {}", self.runs))?;
        let nees = self.nees;
        check(nees.probability > 0.0 && nees.probability < 1.0, || "nees.probability must lie in (0, 1)".into())?;
        check(nees.burn_in < self.k_max, || "nees.burn_in must be smaller than k_max".into())?;
        let m = self.monitors;
        check(m.bracket > 1.0, || format!("monitors.bracket must exceed 1, got {}", m.bracket))?;
        check(m.slack >= 0.0 && m.epsilon > 0.0 && m.delta > 0.0, || "monitors slack/epsilon/delta invalid".into())?;
        check(m.samples >= 1, || "monitors.samples must be positive".into())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_has_136_cells() {
        let s = Scenario::default();
        s.validate().unwrap();
        assert_eq!(s.partition.n_total(), 136);
        assert_eq!(Scenario::from_json("{}").unwrap(), s);
    }

    #[test]
    fn round_trip_and_hash() {
        let s = Scenario::default();
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.hash(), s.hash());
        let other = Scenario { seed: 2, ..s.clone() };
        assert_ne!(other.hash(), s.hash());
    }

    #[test]
    fn rejects_unknown_fields() {
        assert!(matches!(Scenario::from_json(r#"{"k_maxx": 3}"#), Err(HarnessError::Json { .. })));
    }

    #[test]
    fn targeted_messages() {
        let mut s = Scenario::default();
        s.truth.dt = 1.5;
        let e = s.validate().unwrap_err().to_string();
        assert!(e.contains("CFL"), "{e}");

        let mut s = Scenario::default();
        s.partition.overlap = 28;
        let e = s.validate().unwrap_err().to_string();
        assert!(e.contains("partition.overlap"), "{e}");

        let mut s = Scenario::default();
        s.sensors.positions = vec![0, 12, 40];
        let e = s.validate().unwrap_err().to_string();
        assert!(e.contains("sensors.positions"), "{e}");

        let mut s = Scenario::default();
        s.schema = "other".into();
        assert!(s.validate().unwrap_err().to_string().contains("schema"));
    }

    #[test]
    fn perturbations_lie_in_range() {
        let s = Scenario::default();
        let base = s.fd().unwrap();
        for fd in s.agent_diagrams().unwrap() {
            for (a, b) in [(fd.v_m, base.v_m), (fd.rho_m, base.rho_m), (fd.rho_c, base.rho_c)] {
                let rel = (a / b - 1.0).abs();
                assert!((0.1 - 1e-12..=0.2 + 1e-12).contains(&rel), "{rel}");
            }
        }
        assert_eq!(s.agent_diagrams().unwrap(), s.agent_diagrams().unwrap());
    }
}
