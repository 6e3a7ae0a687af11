//! Covariance-dependent bounds evaluated on top of precomputed constants.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use smm::{build_mode_matrices, observable_modes};

use crate::analytic::{analytic_bounds, rate_constants, residence, sigma_max_sq_bound};
use crate::linalg::{check_spd, spectral_norm};
use crate::{BoundConfig, BoundsError, AnalyticBounds, GainConstants, ExtremizedBounds, RateConstants, Residence};

/// Every constant of the bound family for one configuration and one initial
/// covariance, keyed by ASCII transliterations of the symbol names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Configuration the report was computed for.
    pub config: BoundConfig,
    /// Sequence-extremized steady bounds.
    #[serde(flatten)]
    pub extremized: ExtremizedBounds,
    /// Closed-form bracket of the steady bounds.
    #[serde(flatten)]
    pub analytic: AnalyticBounds,
    /// `c̃₁(Γ₀)`.
    pub c1_tilde: f64,
    /// `c̃₂(Γ₀)`.
    pub c2_tilde: f64,
    /// `𝔠₁(Γ₀)`.
    pub frak_c1: f64,
    /// `𝔠₂(Γ₀)`.
    pub frak_c2: f64,
    /// Interval-independent gain constants.
    #[serde(flatten)]
    pub gain: GainConstants,
    /// `γ̄(Γ₀)`.
    pub gamma_bar: f64,
    /// `𝔨(Γ₀)`.
    pub frak_k: f64,
    /// `𝔠(Γ₀)`.
    pub frak_c: f64,
    /// `𝔥(ε, Γ₀)`.
    pub frak_h: f64,
    /// Rate constants at `(d₁, d₂) = (c₁, c₂)`.
    #[serde(flatten)]
    pub rate: RateConstants,
    /// `max σ²_max` over the observable set.
    pub sigma_max_sq: f64,
    /// Closed-form bound on `sigma_max_sq`.
    pub sigma_max_sq_bound: f64,
    /// `𝔞(Γ₀)`.
    pub frak_a: f64,
    /// `𝔮(Γ₀)`.
    pub frak_q: f64,
    /// `1 − 𝔮(Γ₀)`.
    pub frak_q_gap: f64,
    /// `𝔱(ε, √n ϱ_m, Γ₀)`.
    pub frak_t: f64,
    /// `𝔢(δ, Γ₀, Γ₀)`.
    pub frak_e: f64,
    /// `𝔢₀(Γ₀)`.
    pub frak_e0: f64,
}

/// Bound evaluator: holds the sequence extremes and the covariance-free
/// constants so that covariance-dependent bounds are cheap to evaluate.
#[derive(Debug, Clone)]
pub struct BoundEngine {
    cfg: BoundConfig,
    extremized: ExtremizedBounds,
    analytic: AnalyticBounds,
    gain: GainConstants,
    sigma_max_sq: f64,
}

impl BoundEngine {
    /// Validates the configuration and precomputes all constant parts.
    pub fn new(cfg: BoundConfig) -> Result<Self, BoundsError> {
        let extremized = crate::extremized_bounds(&cfg)?;
        Self::with_extremized(cfg, extremized)
    }

    /// Builds an engine around already computed sequence bounds.
    pub fn with_extremized(cfg: BoundConfig, extremized: ExtremizedBounds) -> Result<Self, BoundsError> {
        cfg.validate()?;
        let grid = cfg.grid()?;
        let sigma_max_sq = observable_modes(cfg.n)
            .into_iter()
            .map(|m| build_mode_matrices(m, cfg.n, &cfg.fd, &grid).map(|s| spectral_norm(&s.a).powi(2)))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok(Self { analytic: analytic_bounds(&cfg)?, gain: GainConstants::new(&cfg)?, extremized, sigma_max_sq, cfg })
    }

    /// The configuration.
    pub fn config(&self) -> &BoundConfig {
        &self.cfg
    }

    /// Sequence-extremized steady bounds.
    pub fn extremized(&self) -> &ExtremizedBounds {
        &self.extremized
    }

    /// Closed-form bracket of the steady bounds.
    pub fn analytic(&self) -> &AnalyticBounds {
        &self.analytic
    }

    /// Interval-independent gain constants.
    pub fn gain(&self) -> &GainConstants {
        &self.gain
    }

    /// `max σ²_max(M)` over the observable set.
    pub fn sigma_max_sq(&self) -> f64 {
        self.sigma_max_sq
    }

    fn nf(&self) -> f64 {
        self.cfg.n as f64
    }

    /// Transient bounds `(c̃₁(M), c̃₂(M))` before the window is filled.
    pub fn transient_bounds(&self, m: &DMatrix<f64>) -> Result<(f64, f64), BoundsError> {
        let (lo, hi) = check_spd(m, self.cfg.n)?;
        let n = self.nf();
        let c1 = if self.cfg.n >= 4 {
            1.0 / (2.0 * (2.0 * n - 5.0) * hi + (2.0 * (n - 3.0).powi(2) - 1.0) * self.cfg.q2)
        } else {
            1.0 / hi
        };
        let c2 = (1.0 / lo).max(1.0 / self.cfg.q1 + 1.0 / self.cfg.r1);
        Ok((c1, c2))
    }

    /// Uniform information bounds `(𝔠₁(M), 𝔠₂(M))` valid for all `k ≥ 0`.
    pub fn information_bounds(&self, m: &DMatrix<f64>) -> Result<(f64, f64), BoundsError> {
        let (c1, c2) = self.transient_bounds(m)?;
        Ok((c1.min(self.extremized.c1), c2.max(self.extremized.c2)))
    }

    /// `γ̄(M)`.
    pub fn gamma_bar(&self, m: &DMatrix<f64>) -> Result<f64, BoundsError> {
        check_spd(m, self.cfg.n)?;
        let n = self.nf();
        let r = self.cfg.ratios()?;
        let s = 1.0 + r.r * (self.cfg.fd.w + self.cfg.fd.v_m);
        let nn = n * n.sqrt();
        Ok(nn * spectral_norm(m) * s * s + nn * self.cfg.q2 * s + n.sqrt() * self.cfg.q2)
    }

    /// Kalman gain bound `𝔨(M)` for an unobservable interval starting with
    /// posterior covariance `M`.
    pub fn gain_bound(&self, m: &DMatrix<f64>) -> Result<f64, BoundsError> {
        let gb = self.gamma_bar(m)?;
        let g = &self.gain;
        let n = self.nf();
        let r = self.cfg.ratios()?;
        let s = 1.0 + r.r * (self.cfg.fd.w + self.cfg.fd.v_m);
        let terms = [
            n.sqrt() * (spectral_norm(m) * s + self.cfg.q2),
            2f64.sqrt() * (self.cfg.r2 + self.cfg.q2),
            2.0 * gb,
            2.0 * (g.t_bar * g.q_bar * gb + g.p_bar),
            2.0 * (g.t_bar * g.p_bar * g.q_bar / g.q_bar_gap + g.p_bar),
        ];
        Ok(2f64.sqrt() / self.cfg.r1 * terms.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    /// `𝔠(M) = c₀ Δx 𝔨(M) / (Δt min{v_m, w})`.
    pub fn interior_factor(&self, m: &DMatrix<f64>) -> Result<f64, BoundsError> {
        let k = self.gain_bound(m)?;
        Ok(self.gain.c0 * self.cfg.dx * k / (self.cfg.dt * self.cfg.fd.v_m.min(self.cfg.fd.w)))
    }

    /// Mean error bound `𝔥(ε, M) = √n (ϱ_m + ε (c₀ + (n−2) 𝔠(M)))` over an
    /// unobservable interval entered with error below `ε`.
    pub fn unobservable_bound(&self, eps: f64, m: &DMatrix<f64>) -> Result<f64, BoundsError> {
        let n = self.nf();
        Ok(n.sqrt() * (self.cfg.fd.rho_m + eps * (self.gain.c0 + (n - 2.0) * self.interior_factor(m)?)))
    }

    /// Rate constants for arbitrary information bounds `d₁ ≤ Γ⁻¹ ≤ d₂`.
    pub fn rate(&self, d1: f64, d2: f64) -> Result<RateConstants, BoundsError> {
        rate_constants(d1, d2, self.cfg.q1, self.sigma_max_sq)
    }

    /// `𝔞(M)` and `𝔮(M)`: the rate constants at `(𝔠₁(M), 𝔠₂(M))`.
    pub fn amplification(&self, m: &DMatrix<f64>) -> Result<RateConstants, BoundsError> {
        let (c1, c2) = self.information_bounds(m)?;
        self.rate(c1, c2)
    }

    /// Residence time and interval cap for an observable interval starting
    /// with posterior covariance `m` and error norm at most `eta`.
    pub fn residence(&self, eps: f64, eta: f64, m: &DMatrix<f64>) -> Result<Residence, BoundsError> {
        Ok(residence(&self.amplification(m)?, self.cfg.c_hat, eps, eta))
    }

    /// `𝔢₀(M) = √n (√n ϱ_m (c₀ + (n−2) 𝔠(M)) + ϱ_m)`.
    pub fn initial_error_bound(&self, m: &DMatrix<f64>) -> Result<f64, BoundsError> {
        let n = self.nf();
        let rho_m = self.cfg.fd.rho_m;
        Ok(n.sqrt() * (n.sqrt() * rho_m * (self.gain.c0 + (n - 2.0) * self.interior_factor(m)?) + rho_m))
    }

    /// `𝔢(δ, M₁, M₂)`: error bound over an unobservable interval that
    /// follows an observable interval started with covariance `M₁`, where
    /// `M₂` is the covariance at the start of the unobservable interval.
    pub fn switching_error_bound(&self, delta: f64, m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> Result<f64, BoundsError> {
        let n = self.nf();
        let rate = self.amplification(m1)?;
        let c = self.cfg.c_hat;
        let entering = delta + c + c * rate.a_hat * rate.q_hat / rate.one_minus_q();
        Ok(n.sqrt() * (self.cfg.fd.rho_m + entering * (self.gain.c0 + (n - 2.0) * self.interior_factor(m2)?)))
    }

    /// Every constant evaluated at the initial covariance `gamma0`.
    pub fn report(&self, gamma0: &DMatrix<f64>) -> Result<BoundReport, BoundsError> {
        let (c1_tilde, c2_tilde) = self.transient_bounds(gamma0)?;
        let (frak_c1, frak_c2) = self.information_bounds(gamma0)?;
        let amp = self.amplification(gamma0)?;
        let eta0 = self.nf().sqrt() * self.cfg.fd.rho_m;
        Ok(BoundReport {
            config: self.cfg.clone(),
            extremized: self.extremized.clone(),
            analytic: self.analytic,
            c1_tilde,
            c2_tilde,
            frak_c1,
            frak_c2,
            gain: self.gain,
            gamma_bar: self.gamma_bar(gamma0)?,
            frak_k: self.gain_bound(gamma0)?,
            frak_c: self.interior_factor(gamma0)?,
            frak_h: self.unobservable_bound(self.cfg.epsilon, gamma0)?,
            rate: self.rate(self.extremized.c1, self.extremized.c2)?,
            sigma_max_sq: self.sigma_max_sq,
            sigma_max_sq_bound: sigma_max_sq_bound(&self.cfg)?,
            frak_a: amp.a_hat,
            frak_q: amp.q_hat,
            frak_q_gap: amp.one_minus_q(),
            frak_t: self.residence(self.cfg.epsilon, eta0, gamma0)?.frak_t,
            frak_e: self.switching_error_bound(self.cfg.delta, gamma0, gamma0)?,
            frak_e0: self.initial_error_bound(gamma0)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine(n: usize) -> BoundEngine {
        BoundEngine::new(BoundConfig::normalized(n)).unwrap()
    }

    #[test]
    fn small_sections_use_inverse_norm() {
        let e = engine(3);
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 1.0, 2.0]));
        let (c1, c2) = e.transient_bounds(&m).unwrap();
        assert!((c1 - 0.5).abs() < 1e-12);
        let cfg = e.config();
        assert!((c2 - (2.0f64).max(1.0 / cfg.q1 + 1.0 / cfg.r1)).abs() < 1e-9);
    }

    #[test]
    fn gain_bound_monotone_in_covariance_norm() {
        let e = engine(5);
        let mut last = 0.0;
        for s in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let k = e.gain_bound(&(DMatrix::identity(5, 5) * s)).unwrap();
            assert!(k >= last);
            last = k;
        }
    }

    #[test]
    fn unobservable_bound_limit() {
        let e = engine(4);
        let m = DMatrix::identity(4, 4);
        let h0 = e.unobservable_bound(0.0, &m).unwrap();
        assert_eq!(h0, 2.0 * e.config().fd.rho_m);
        let h1 = e.unobservable_bound(0.01, &m).unwrap();
        let h2 = e.unobservable_bound(0.02, &m).unwrap();
        assert!(h0 < h1 && h1 < h2);
        assert!(((h2 - h0) - 2.0 * (h1 - h0)).abs() <= 1e-9 * h2);
    }

    #[test]
    fn report_invariants() {
        let e = engine(4);
        let r = e.report(&DMatrix::identity(4, 4)).unwrap();
        assert!(0.0 < r.extremized.c1 && r.extremized.c1 < r.extremized.c2);
        assert!(0.0 < r.frak_q && r.frak_q <= 1.0 && r.frak_q_gap > 0.0 && r.frak_a >= 1.0);
        assert!(r.analytic.a_underline <= r.extremized.a && r.extremized.b <= r.analytic.b_bar);
        assert!(r.sigma_max_sq <= r.sigma_max_sq_bound);
        assert!(r.gain.c0 >= 1.0);
        assert!(r.frak_c1 <= r.extremized.c1 && r.frak_c2 >= r.extremized.c2);
    }

    #[test]
    fn report_rejects_indefinite_covariance() {
        let e = engine(3);
        assert!(e.report(&-DMatrix::identity(3, 3)).is_err());
        assert!(e.report(&DMatrix::identity(4, 4)).is_err());
    }
}
