//! DLKCF variant that tracks the cross-covariances between agents and uses
//! them in the gain and covariance recursions.
//!
//! It exists to show that, unlike the DLKCF, its covariance can grow without
//! bound in an always-observable section when a neighbor stays unobservable
//! for long enough.

use nalgebra::{DMatrix, DVector};
use smm::{build_mode_matrices, Mode};

use crate::consensus::{eigen_extremes, GammaRule};
use crate::kf::Gaussian;
use crate::{AgentModel, FilterConfig, FilterError, PartitionLayout, Projection, SensorLayout, Sharing};

/// All covariance blocks `Γ^j_i = E[η_i η_jᵀ]`, including `Γ^i_i = Γ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCovariancePack {
    blocks: Vec<Vec<DMatrix<f64>>>,
}

impl CrossCovariancePack {
    /// Block-diagonal pack with zero cross-covariances.
    pub fn block_diagonal(covs: &[DMatrix<f64>]) -> Self {
        let n = covs.len();
        let blocks = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { covs[i].clone() } else { DMatrix::zeros(covs[i].nrows(), covs[j].nrows()) })
                    .collect()
            })
            .collect();
        Self { blocks }
    }

    /// `Γ^j_i`.
    pub fn get(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.blocks[i][j]
    }

    /// Largest `‖Γ^j_i − (Γ^i_j)ᵀ‖_max` relative to the largest block entry.
    pub fn transpose_asymmetry(&self) -> f64 {
        let n = self.blocks.len();
        let mut scale = f64::MIN_POSITIVE;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                scale = scale.max(self.blocks[i][j].abs().max());
                worst = worst.max((&self.blocks[i][j] - self.blocks[j][i].transpose()).abs().max());
            }
        }
        worst / scale
    }

    /// Dense joint covariance of the concatenated section errors.
    pub fn joint(&self) -> DMatrix<f64> {
        let dims: Vec<usize> = self.blocks.iter().map(|row| row[0].nrows()).collect();
        let offsets: Vec<usize> = dims.iter().scan(0, |acc, d| { let o = *acc; *acc += d; Some(o) }).collect();
        let total = dims.iter().sum();
        let mut m = DMatrix::zeros(total, total);
        for (i, row) in self.blocks.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                m.view_mut((offsets[i], offsets[j]), (dims[i], dims[j])).copy_from(b);
            }
        }
        m
    }
}

/// Per-step inputs of the cross-covariance-tracking filter.
#[derive(Debug, Clone, Copy)]
pub struct OptimalInput<'a> {
    /// Step index.
    pub k: usize,
    /// One reading per sensor.
    pub readings: &'a [f64],
    /// Mode of every section.
    pub modes: &'a [Mode],
}

/// Cross-covariance-tracking DLKCF.
#[derive(Debug, Clone)]
pub struct OptimalDlkcf {
    layout: PartitionLayout,
    sensors: SensorLayout,
    models: Vec<AgentModel>,
    config: FilterConfig,
    cross_noise: bool,
    guard: f64,
    means: Vec<DVector<f64>>,
    posterior: CrossCovariancePack,
    prior: CrossCovariancePack,
    gains: Vec<DMatrix<f64>>,
    consensus: Vec<Vec<(usize, DMatrix<f64>)>>,
    fused: Vec<Vec<usize>>,
}

impl OptimalDlkcf {
    /// Filter with zero initial cross-covariances. `cross_noise` adds model
    /// noise correlation on shared cells; `guard` bounds every `‖Γ_i‖`.
    pub fn new(
        layout: PartitionLayout,
        sensors: SensorLayout,
        models: Vec<AgentModel>,
        initial: Vec<Gaussian>,
        config: FilterConfig,
        cross_noise: bool,
        guard: f64,
    ) -> Result<Self, FilterError> {
        let n = layout.n_sections();
        if models.len() != n || initial.len() != n {
            return Err(FilterError::Dimension { what: "agents", expected: n, got: models.len().min(initial.len()) });
        }
        if matches!(config.gamma_rule, GammaRule::Bounded { .. } | GammaRule::StabilityOnly { .. }) {
            return Err(FilterError::Config("the cross-covariance filter supports fixed or prior-normalized scaling".into()));
        }
        config.gamma_rule.validate()?;
        let covs: Vec<_> = initial.iter().map(|b| b.cov.clone()).collect();
        let posterior = CrossCovariancePack::block_diagonal(&covs);
        Ok(Self {
            prior: posterior.clone(),
            posterior,
            means: initial.into_iter().map(|b| b.mean).collect(),
            gains: vec![DMatrix::zeros(0, 0); n],
            consensus: vec![Vec::new(); n],
            fused: vec![Vec::new(); n],
            layout,
            sensors,
            models,
            config,
            cross_noise,
            guard,
        })
    }

    /// Posterior covariance blocks.
    pub fn posterior(&self) -> &CrossCovariancePack {
        &self.posterior
    }

    /// Prior covariance blocks of the last step.
    pub fn prior(&self) -> &CrossCovariancePack {
        &self.prior
    }

    /// Posterior means.
    pub fn means(&self) -> &[DVector<f64>] {
        &self.means
    }

    /// Kalman gains of the last step.
    pub fn gains(&self) -> &[DMatrix<f64>] {
        &self.gains
    }

    /// Consensus gains `(neighbor, C)` of the last step.
    pub fn consensus_gains(&self) -> &[Vec<(usize, DMatrix<f64>)>] {
        &self.consensus
    }

    /// Sensors each agent fused in the last step.
    pub fn fused(&self) -> &[Vec<usize>] {
        &self.fused
    }

    /// Model noise cross-covariance `Q^j_i`.
    pub fn cross_noise(&self, i: usize, j: usize) -> DMatrix<f64> {
        if i == j {
            return self.models[i].q.clone();
        }
        let mut q = DMatrix::zeros(self.layout.dim(i), self.layout.dim(j));
        if self.cross_noise && self.layout.are_neighbors(i, j) {
            for g in self.layout.overlap(i, j).expect("neighbors") {
                let (a, b) = (self.layout.local_index(i, g).unwrap(), self.layout.local_index(j, g).unwrap());
                q[(a, b)] = (self.models[i].q[(a, a)] * self.models[j].q[(b, b)]).sqrt();
            }
        }
        q
    }

    /// Measurement noise cross-covariance `R^j_i` between the fused stacks.
    pub fn cross_measurement_noise(&self, i: usize, j: usize) -> DMatrix<f64> {
        let (fi, fj) = (&self.fused[i], &self.fused[j]);
        DMatrix::from_fn(fi.len(), fj.len(), |a, b| {
            if fi[a] == fj[b] {
                self.sensors.sensors()[fi[a]].reported_std.powi(2)
            } else {
                0.0
            }
        })
    }

    fn proj(&self, i: usize, j: usize) -> Projection {
        self.layout.project(i, j).expect("neighbors")
    }

    /// One prediction/correction of means and every covariance block.
    pub fn step(&mut self, input: OptimalInput) -> Result<(), FilterError> {
        let n = self.layout.n_sections();
        if input.modes.len() != n || input.readings.len() != self.sensors.len() {
            return Err(FilterError::Dimension { what: "modes or readings", expected: n, got: input.modes.len() });
        }
        let mut a = Vec::with_capacity(n);
        let mut prior_means = Vec::with_capacity(n);
        for i in 0..n {
            let m = &self.models[i];
            let mats = build_mode_matrices(input.modes[i], self.layout.dim(i), &m.fd, &m.grid)?;
            let mut x = &mats.a * &self.means[i];
            if self.config.include_affine {
                x += mats.affine(&m.fd);
            }
            prior_means.push(x);
            a.push(mats.a);
        }
        let blocks = (0..n)
            .map(|i| (0..n).map(|j| &a[i] * self.posterior.get(i, j) * a[j].transpose() + self.cross_noise(i, j)).collect())
            .collect();
        self.prior = CrossCovariancePack { blocks };

        let sharing = if self.config.share_measurements { Sharing::Neighbors } else { Sharing::Local };
        self.fused = (0..n).map(|i| self.sensors.visible(&self.layout, i, sharing)).collect();

        // Consensus gains.
        let mut cons: Vec<Vec<(usize, DMatrix<f64>)>> = vec![Vec::new(); n];
        for (i, gains) in cons.iter_mut().enumerate() {
            let cov = self.prior.get(i, i);
            for p in self.layout.neighbors(i) {
                let active = input.modes[i].is_observable() && input.modes[p].is_observable();
                let gamma = match self.config.gamma_rule {
                    _ if !active => 0.0,
                    GammaRule::Fixed { gamma } => gamma,
                    GammaRule::PriorNormalized { kappa } => kappa / eigen_extremes(cov).1,
                    _ => unreachable!("rejected at construction"),
                };
                gains.push((p, self.proj(i, p).right_transpose(cov) * gamma));
            }
        }

        // Kalman gains and measurement models.
        let mut k_gain = Vec::with_capacity(n);
        let mut f = Vec::with_capacity(n);
        let mut hs = Vec::with_capacity(n);
        for i in 0..n {
            let (h, r) = self.sensors.output(&self.layout, i, &self.fused[i]);
            let cov = self.prior.get(i, i);
            let mut lead = cov.clone();
            for (p, c) in &cons[i] {
                let diff = self.proj(*p, i).left(self.prior.get(*p, i)) - self.proj(i, *p).left(cov);
                lead += c * diff;
            }
            let s = &h * cov * h.transpose() + r;
            let k = if h.nrows() == 0 {
                DMatrix::zeros(cov.nrows(), 0)
            } else {
                let chol = nalgebra::Cholesky::new(s).ok_or_else(|| FilterError::NotPositiveDefinite("innovation covariance".into()))?;
                chol.solve(&(&h * lead.transpose())).transpose()
            };
            f.push(DMatrix::identity(cov.nrows(), cov.nrows()) - &k * &h);
            k_gain.push(k);
            hs.push(h);
        }
        self.gains = k_gain;
        self.consensus = cons;

        // Covariance blocks.
        let mut post = vec![Vec::with_capacity(n); n];
        for (i, row) in post.iter_mut().enumerate() {
            for j in 0..n {
                row.push(self.posterior_block(i, j, &f));
            }
        }
        self.posterior = CrossCovariancePack { blocks: post };

        // Means.
        for i in 0..n {
            let z = DVector::from_iterator(self.fused[i].len(), self.fused[i].iter().map(|&s| input.readings[s]));
            let mut x = &prior_means[i] + &self.gains[i] * (z - &hs[i] * &prior_means[i]);
            for (p, c) in &self.consensus[i] {
                x += c * (self.proj(*p, i).apply(&prior_means[*p]) - self.proj(i, *p).apply(&prior_means[i]));
            }
            self.means[i] = x;
        }

        for i in 0..n {
            let norm = self.posterior.get(i, i).norm();
            if !(norm <= self.guard) {
                return Err(FilterError::Overflow { k: input.k, norm });
            }
        }
        Ok(())
    }

    fn posterior_block(&self, i: usize, j: usize, f: &[DMatrix<f64>]) -> DMatrix<f64> {
        let g = |a: usize, b: usize| self.prior.get(a, b);
        let mut out = &f[i] * g(i, j) * f[j].transpose();
        out += &self.gains[i] * self.cross_measurement_noise(i, j) * self.gains[j].transpose();
        for (q, cq) in &self.consensus[j] {
            let inner = self.proj(*q, j).right_transpose(g(i, *q)) - self.proj(j, *q).right_transpose(g(i, j));
            out += &f[i] * inner * cq.transpose();
        }
        for (p, cp) in &self.consensus[i] {
            let inner = self.proj(*p, i).left(g(*p, j)) - self.proj(i, *p).left(g(i, j));
            out += cp * inner * f[j].transpose();
        }
        for (p, cp) in &self.consensus[i] {
            for (q, cq) in &self.consensus[j] {
                let (pi, ip, qj, jq) = (self.proj(*p, i), self.proj(i, *p), self.proj(*q, j), self.proj(j, *q));
                let omega = qj.right_transpose(&pi.left(g(*p, *q))) - jq.right_transpose(&pi.left(g(*p, j)))
                    - qj.right_transpose(&ip.left(g(i, *q)))
                    + jq.right_transpose(&ip.left(g(i, j)));
                out += cp * omega * cq.transpose();
            }
        }
        out
    }
}
