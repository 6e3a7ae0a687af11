//! Bank of per-section agents running the local KF, the DLKCF without
//! consensus, or the DLKCF with consensus.
//!
//! One step follows a fixed pipeline: every agent selects its mode and
//! predicts; data packets (readings, overlap priors, modes) cross the lossy
//! network; agents with consensus enabled exchange their scaled `λ_min(Λ)`
//! and then their scaling-factor proposals over reliable control rounds;
//! finally every agent corrects.

use std::time::{Duration, Instant};

use ctm::{FundamentalDiagram, Grid};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use smm::{build_mode_matrices, infer_mode, Mode};

use crate::consensus::{
    consensus_gain, eigen_extremes, g_matrix, gamma_hat, gamma_star, lambda_from_g, measurement_information,
    overlap_weights, stability_denominator, GammaRule,
};
use crate::exchange::{Envelope, ExchangePacket, Network, Reading};
use crate::kf::{kf_correct, symmetrize, Gaussian};
use crate::{DropPolicy, FilterError, PartitionLayout, SensorLayout, Sharing};

/// Which distributed estimator the bank runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Independent local KFs on own sensors only.
    Lkf,
    /// Shared sensors, consensus gain zero.
    Dlkcf0,
    /// Shared sensors and consensus gain.
    Dlkcf,
}

/// Transition matrix driving the covariance prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceModel {
    /// The agent's own mode estimate `Â`.
    #[default]
    Inferred,
    /// The true section mode supplied with each step.
    True,
}

/// Filter options shared by all agents of a bank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Estimator variant.
    pub variant: Variant,
    /// Scaling-factor rule of the consensus gain.
    pub gamma_rule: GammaRule,
    /// Propagate the affine inflow/outflow terms in the mean prediction.
    pub include_affine: bool,
    /// Matrix used to propagate covariances.
    pub covariance_model: CovarianceModel,
    /// Fuse neighbor-owned sensors (ignored by the local KF).
    pub share_measurements: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Dlkcf,
            gamma_rule: GammaRule::default(),
            include_affine: true,
            covariance_model: CovarianceModel::Inferred,
            share_measurements: true,
        }
    }
}

/// Model parameters an agent believes for its section.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    /// Fundamental diagram (possibly perturbed from the truth).
    pub fd: FundamentalDiagram,
    /// Grid with `n_cells` equal to the section dimension.
    pub grid: Grid,
    /// Process noise covariance.
    pub q: DMatrix<f64>,
}

/// Consensus state of one link as seen by an agent.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    /// Neighbor section.
    pub neighbor: usize,
    /// Whether the neighbor's data packet arrived this step.
    pub received: bool,
    /// Disagreement `Î_{j,i} ρ_{j,k|k−1} − Î_{i,j} ρ_{i,k|k−1}` when received.
    pub disagreement: Option<DVector<f64>>,
    /// Magnitude cap `γ̂^j_i`.
    pub gamma_hat: f64,
    /// Applied scaling factor `γ^j_i`.
    pub gamma: f64,
}

/// Everything one agent holds between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    /// Section index.
    pub id: usize,
    /// Posterior belief `ρ_{k|k}`, `Γ_{k|k}`.
    pub posterior: Gaussian,
    /// Prior belief `ρ_{k|k−1}`, `Γ_{k|k−1}`.
    pub prior: Gaussian,
    /// Mode used for the last prediction.
    pub mode: Option<Mode>,
    /// Kalman gain of the last correction.
    pub gain: DMatrix<f64>,
    /// Sensors fused in the last correction, in stacking order.
    pub fused: Vec<usize>,
    /// Per-neighbor consensus state.
    pub links: Vec<LinkState>,
    /// Stability cap `γ*` of the last step.
    pub gamma_star: f64,
    /// `λ_min(Λ_i)` of the last step (NaN when not computed).
    pub lambda_min: f64,
    /// Consensus correction added to the posterior mean.
    pub consensus_term: DVector<f64>,
    /// Boundary readings of the last step, used to select the next mode.
    pub last_boundary: Option<(f64, f64)>,
}

/// Per-step inputs.
#[derive(Debug, Clone, Copy)]
pub struct StepInput<'a> {
    /// Step index.
    pub k: usize,
    /// One reading per sensor of the road's sensor layout.
    pub readings: &'a [f64],
    /// Modes imposed on the agents instead of inferring them.
    pub scheduled_modes: Option<&'a [Mode]>,
    /// True section modes (needed for [`CovarianceModel::True`]).
    pub true_modes: Option<&'a [Mode]>,
}

/// Distributed estimator over a partitioned road.
#[derive(Debug, Clone)]
pub struct DistributedFilter {
    layout: PartitionLayout,
    sensors: SensorLayout,
    config: FilterConfig,
    models: Vec<AgentModel>,
    agents: Vec<AgentState>,
    network: Network,
    weights: Vec<DVector<f64>>,
    agent_time: Vec<Duration>,
}

struct Predicted {
    propagated: DMatrix<f64>,
}

impl DistributedFilter {
    /// Bank with one agent per section, starting from `initial` beliefs.
    pub fn new(
        layout: PartitionLayout,
        sensors: SensorLayout,
        models: Vec<AgentModel>,
        initial: Vec<Gaussian>,
        config: FilterConfig,
        drops: DropPolicy,
    ) -> Result<Self, FilterError> {
        let n = layout.n_sections();
        if models.len() != n || initial.len() != n {
            return Err(FilterError::Dimension { what: "agents", expected: n, got: models.len().min(initial.len()) });
        }
        config.gamma_rule.validate()?;
        sensors.validate(&layout)?;
        for (i, (m, b)) in models.iter().zip(&initial).enumerate() {
            let d = layout.dim(i);
            if m.grid.n_cells != d || m.q.shape() != (d, d) || b.dim() != d {
                return Err(FilterError::Dimension { what: "agent model", expected: d, got: b.dim() });
            }
            m.grid.check_cfl(&m.fd)?;
            if nalgebra::Cholesky::new(b.cov.clone()).is_none() {
                return Err(FilterError::NotPositiveDefinite(format!("initial covariance of agent {i}")));
            }
        }
        let agents = initial
            .into_iter()
            .enumerate()
            .map(|(i, b)| AgentState {
                id: i,
                prior: b.clone(),
                gain: DMatrix::zeros(b.dim(), 0),
                consensus_term: DVector::zeros(b.dim()),
                posterior: b,
                mode: None,
                fused: Vec::new(),
                links: Vec::new(),
                gamma_star: 0.0,
                lambda_min: f64::NAN,
                last_boundary: None,
            })
            .collect();
        let weights = (0..n).map(|i| overlap_weights(&layout, i)).collect();
        let network = Network::new(&layout, drops)?;
        Ok(Self { layout, sensors, config, models, agents, network, weights, agent_time: vec![Duration::ZERO; n] })
    }

    /// Partition layout.
    pub fn layout(&self) -> &PartitionLayout {
        &self.layout
    }

    /// Sensor layout.
    pub fn sensors(&self) -> &SensorLayout {
        &self.sensors
    }

    /// Filter options.
    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    /// Agent models.
    pub fn models(&self) -> &[AgentModel] {
        &self.models
    }

    /// Agent states.
    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    /// Network (including its drop log).
    pub fn network(&self) -> &Network {
        &self.network
    }

    /// Cumulative computation time per agent.
    pub fn agent_times(&self) -> &[Duration] {
        &self.agent_time
    }

    /// Posterior means.
    pub fn estimates(&self) -> Vec<DVector<f64>> {
        self.agents.iter().map(|a| a.posterior.mean.clone()).collect()
    }

    fn select_mode(&self, i: usize, input: &StepInput) -> Mode {
        if let Some(modes) = input.scheduled_modes {
            return modes[i];
        }
        let a = &self.agents[i];
        let x = &a.posterior.mean;
        let (up, down) = a.last_boundary.unwrap_or((x[0], x[x.len() - 1]));
        infer_mode(up, down, a.mode, x, &self.models[i].fd)
    }

    fn predict(&mut self, i: usize, input: &StepInput) -> Result<Predicted, FilterError> {
        let mode = self.select_mode(i, input);
        let model = &self.models[i];
        let n = self.layout.dim(i);
        let m = build_mode_matrices(mode, n, &model.fd, &model.grid)?;
        let a_cov = match self.config.covariance_model {
            CovarianceModel::Inferred => m.a.clone(),
            CovarianceModel::True => {
                let modes = input
                    .true_modes
                    .ok_or_else(|| FilterError::Config("true modes are required for true-mode covariance prediction".into()))?;
                build_mode_matrices(modes[i], n, &model.fd, &model.grid)?.a
            }
        };
        let agent = &mut self.agents[i];
        let mut mean = &m.a * &agent.posterior.mean;
        if self.config.include_affine {
            mean += m.affine(&model.fd);
        }
        let propagated = &a_cov * &agent.posterior.cov * a_cov.transpose();
        let mut cov = &propagated + &model.q;
        symmetrize(&mut cov);
        agent.prior = Gaussian { mean, cov };
        agent.mode = Some(mode);
        Ok(Predicted { propagated })
    }

    fn readings_of(&self, owner: usize, values: &[f64]) -> Vec<Reading> {
        self.sensors
            .owned(owner)
            .into_iter()
            .map(|s| {
                let std = self.sensors.sensors()[s].reported_std;
                Reading { sensor: s, value: values[s], variance: std * std }
            })
            .collect()
    }

    /// Runs one predict/exchange/correct cycle.
    pub fn step(&mut self, input: StepInput) -> Result<(), FilterError> {
        let n_agents = self.layout.n_sections();
        if input.readings.len() != self.sensors.len() {
            return Err(FilterError::Dimension { what: "readings", expected: self.sensors.len(), got: input.readings.len() });
        }
        for modes in [input.scheduled_modes, input.true_modes].into_iter().flatten() {
            if modes.len() != n_agents {
                return Err(FilterError::Dimension { what: "modes", expected: n_agents, got: modes.len() });
            }
        }
        let variant = self.config.variant;
        let communicate = variant != Variant::Lkf;
        let consensus = variant == Variant::Dlkcf;

        let mut predicted = Vec::with_capacity(n_agents);
        for i in 0..n_agents {
            let t = Instant::now();
            predicted.push(self.predict(i, &input)?);
            self.agent_time[i] += t.elapsed();
        }

        // Data round.
        let mut outgoing = Vec::new();
        if communicate {
            for i in 0..n_agents {
                let t = Instant::now();
                let readings = self.readings_of(i, input.readings);
                for j in self.layout.neighbors(i) {
                    let proj = self.layout.project(i, j)?;
                    outgoing.push(Envelope {
                        sender: i,
                        recipient: j,
                        payload: ExchangePacket {
                            sender: i,
                            recipient: j,
                            readings: readings.clone(),
                            overlap_prior: proj.apply(&self.agents[i].prior.mean),
                            mode: self.agents[i].mode.expect("mode set in prediction"),
                        },
                    });
                }
                self.agent_time[i] += t.elapsed();
            }
        }
        let inbox = self.network.deliver(input.k, outgoing, true)?;

        // Stacked measurement models and disagreements.
        let sharing = if communicate && self.config.share_measurements { Sharing::Neighbors } else { Sharing::Local };
        let mut stacks = Vec::with_capacity(n_agents);
        for i in 0..n_agents {
            let t = Instant::now();
            let received: Vec<&ExchangePacket> = inbox[i].iter().map(|e| &e.payload).collect();
            let fused: Vec<usize> = self
                .sensors
                .visible(&self.layout, i, sharing)
                .into_iter()
                .filter(|&s| {
                    let owner = self.sensors.sensors()[s].owner;
                    owner == i || received.iter().any(|p| p.sender == owner)
                })
                .collect();
            let (h, r) = self.sensors.output(&self.layout, i, &fused);
            let z = DVector::from_iterator(fused.len(), fused.iter().map(|&s| input.readings[s]));
            let mut links = Vec::new();
            for j in self.layout.neighbors(i) {
                let packet = received.iter().find(|p| p.sender == j);
                let proj = self.layout.project(i, j)?;
                let disagreement = packet.map(|p| &p.overlap_prior - proj.apply(&self.agents[i].prior.mean));
                links.push(LinkState { neighbor: j, received: packet.is_some(), disagreement, gamma_hat: f64::INFINITY, gamma: 0.0 });
            }
            let neighbor_modes: Vec<(usize, Mode)> = received.iter().map(|p| (p.sender, p.mode)).collect();
            stacks.push((fused, z, h, r, neighbor_modes));
            self.agents[i].links = links;
            self.agent_time[i] += t.elapsed();
        }

        if consensus {
            self.consensus_round(&input, &predicted, &stacks)?;
        }

        for (i, (fused, z, h, r, _)) in stacks.into_iter().enumerate() {
            let t = Instant::now();
            let agent = &mut self.agents[i];
            let corr = kf_correct(&agent.prior, &z, &h, &r)?;
            let mut term = DVector::zeros(agent.prior.dim());
            for link in &agent.links {
                if link.gamma > 0.0 {
                    let proj = self.layout.project(i, link.neighbor)?;
                    let u = link.disagreement.as_ref().expect("active links carry a disagreement");
                    term += consensus_gain(link.gamma, &agent.prior.cov, &proj) * u;
                }
            }
            agent.posterior = corr.posterior;
            agent.posterior.mean += &term;
            agent.consensus_term = term;
            agent.gain = corr.gain;
            agent.fused = fused;
            let (up, down) = self.sensors.boundary_sensors(&self.layout, i);
            agent.last_boundary = Some((input.readings[up], input.readings[down]));
            self.agent_time[i] += t.elapsed();
        }
        Ok(())
    }

    #[allow(clippy::type_complexity)]
    fn consensus_round(
        &mut self,
        input: &StepInput,
        predicted: &[Predicted],
        stacks: &[(Vec<usize>, DVector<f64>, DMatrix<f64>, DMatrix<f64>, Vec<(usize, Mode)>)],
    ) -> Result<(), FilterError> {
        let n_agents = self.layout.n_sections();
        let mut denominators = vec![0.0; n_agents];
        let mut control = Vec::new();
        for i in 0..n_agents {
            let t = Instant::now();
            let (_, _, h, r, _) = &stacks[i];
            let s = measurement_information(h, r)?;
            let agent = &self.agents[i];
            let g = g_matrix(&agent.prior.cov, &s);
            let lam = lambda_from_g(&predicted[i].propagated, &g).map(|l| eigen_extremes(&l).0).unwrap_or(f64::NAN);
            denominators[i] = stability_denominator(&g, &self.weights[i]);
            let scaled = lam / (self.layout.neighbors(i).len() + 1) as f64;
            self.agents[i].lambda_min = lam;
            for j in self.layout.neighbors(i) {
                control.push(Envelope { sender: i, recipient: j, payload: scaled });
            }
            self.agent_time[i] += t.elapsed();
        }
        let lambda_inbox = self.network.deliver(input.k, control, false)?;

        let mut proposals = Vec::new();
        for i in 0..n_agents {
            let t = Instant::now();
            let n_nb = self.layout.neighbors(i).len();
            let own = self.agents[i].lambda_min / (n_nb + 1) as f64;
            let joint = lambda_inbox[i]
                .iter()
                .map(|e| e.payload)
                .fold(own, |a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.min(b) });
            let gs = gamma_star(joint, denominators[i]);
            let observable = self.agents[i].mode.is_some_and(|m| m.is_observable());
            let neighbor_modes = &stacks[i].4;
            let prior_cov = self.agents[i].prior.cov.clone();
            let rule = self.config.gamma_rule;
            let mut links = std::mem::take(&mut self.agents[i].links);
            for link in &mut links {
                let proj = self.layout.project(i, link.neighbor)?;
                let neighbor_observable =
                    neighbor_modes.iter().any(|(s, m)| *s == link.neighbor && m.is_observable());
                let active = link.received && observable && neighbor_observable;
                if let (GammaRule::Bounded { c_hat, .. }, Some(u)) = (rule, &link.disagreement) {
                    link.gamma_hat = gamma_hat(c_hat, n_nb, &prior_cov, &proj, u);
                }
                let proposal = if !active {
                    0.0
                } else {
                    match rule {
                        GammaRule::Bounded { .. } => gs.min(link.gamma_hat),
                        GammaRule::StabilityOnly { .. } => gs,
                        GammaRule::Fixed { gamma } => gamma,
                        GammaRule::PriorNormalized { kappa } => kappa / eigen_extremes(&prior_cov).1,
                    }
                };
                link.gamma = proposal;
                proposals.push(Envelope { sender: i, recipient: link.neighbor, payload: proposal });
            }
            self.agents[i].links = links;
            self.agents[i].gamma_star = gs;
            self.agent_time[i] += t.elapsed();
        }
        let proposal_inbox = self.network.deliver(input.k, proposals, false)?;

        for i in 0..n_agents {
            let rule = self.config.gamma_rule;
            for link in &mut self.agents[i].links {
                let theirs = proposal_inbox[i].iter().find(|e| e.sender == link.neighbor).map_or(0.0, |e| e.payload);
                link.gamma = match rule {
                    GammaRule::Bounded { backoff, .. } | GammaRule::StabilityOnly { backoff } => {
                        backoff * link.gamma.min(theirs)
                    }
                    GammaRule::Fixed { .. } => link.gamma.min(theirs),
                    GammaRule::PriorNormalized { .. } => {
                        if theirs > 0.0 {
                            link.gamma
                        } else {
                            0.0
                        }
                    }
                };
                if !link.gamma.is_finite() {
                    link.gamma = 0.0;
                }
            }
        }
        Ok(())
    }
}
