//! Closed-form bounds that need no sequence enumeration.

use serde::{Deserialize, Serialize};

use crate::{BoundConfig, BoundsError};

/// Closed-form bracket of the steady covariance bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticBounds {
    /// `θ̲ = min{θ_v, 1−θ_v, θ_w, 1−θ_w}`.
    pub theta_underline: f64,
    /// `θ̃ = min{1−θ_v, 1−θ_w}`.
    pub theta_tilde: f64,
    /// Lower bound on `a`.
    pub a_underline: f64,
    /// Upper bound on `b`.
    pub b_bar: f64,
    /// `a̲/(1 + a̲b̄)`, below `c₁`.
    pub c1_analytic: f64,
    /// `(1 + a̲b̄)/a̲`, above `c₂`.
    pub c2_analytic: f64,
}

/// Evaluates the closed-form lower bound of `a` and upper bound of `b`.
pub fn analytic_bounds(cfg: &BoundConfig) -> Result<AnalyticBounds, BoundsError> {
    cfg.validate()?;
    let r = cfg.ratios()?;
    let (tv, tw) = (r.theta_v, r.theta_w);
    let theta_underline = tv.min(1.0 - tv).min(tw).min(1.0 - tw);
    let theta_tilde = (1.0 - tv).min(1.0 - tw);
    let n = cfg.n as f64;
    let t1 = cfg.t1() as f64;
    let pow2 = 2f64.powf(n - 2.0);
    let th2n = theta_tilde.powf(2.0 * n);
    let first_a = if cfg.t1() == 1 {
        cfg.q1
    } else {
        cfg.q1
            * (1.0
                + th2n * (1.0 - theta_tilde.powf(2.0 * n * (t1 - 1.0)))
                    / ((1.0 - th2n) * (4.0 * n * (2.0 * t1 - 1.0).powi(2) * pow2).sqrt()))
    };
    let second_a = theta_underline.powf(t1 * (t1 + 1.0))
        / (cfg.r2 * 2.0 * (2.0 * t1 + 1.0) * (4.0 * n * (t1 + 1.0).powi(2) * pow2).sqrt());
    let a_underline = first_a.min(second_a);
    let b_bar = (cfg.q2 * (2.0 * t1 * t1 - 1.0))
        .max((1.0 + t1 * (t1 + 2.0) * (4.0 * n * pow2).sqrt() / theta_tilde.powf(2.0 * t1 * n)) / cfg.r1);
    Ok(AnalyticBounds {
        theta_underline,
        theta_tilde,
        a_underline,
        b_bar,
        c1_analytic: a_underline / (1.0 + a_underline * b_bar),
        c2_analytic: (1.0 + a_underline * b_bar) / a_underline,
    })
}

/// Constants of the Kalman gain bound in unobservable intervals that do not
/// depend on the covariance at the interval start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainConstants {
    /// `ǎ = min{2/r₂, q₁}`.
    pub a_check: f64,
    /// `b̌ = max{2/r₁, q₂}`.
    pub b_check: f64,
    /// `č₁ = ǎ/(1 + ǎb̌)`.
    pub c1_check: f64,
    /// `č₂ = (1 + ǎb̌)/ǎ`.
    pub c2_check: f64,
    /// `č₃ = č₁⁻¹ + q₁⁻¹č₁⁻²`.
    pub c3_check: f64,
    /// `t̄ = √2 (n−2) (č₂/č₁)^{1/2}`.
    pub t_bar: f64,
    /// `q̄ = (1 − (č₃č₂)⁻¹)^{1/2}`.
    pub q_bar: f64,
    /// `1 − q̄`, kept separately because `q̄` may round to one.
    pub q_bar_gap: f64,
    /// `p̄ = 2 r₂ q₁⁻¹ (Δt/Δx) max{v_m, w} (r₂ + q₂) + q₂`.
    pub p_bar: f64,
    /// `c₀ = max{1, (č₂/č₁)^{1/2} r₂ q₁⁻¹}`.
    pub c0: f64,
}

impl GainConstants {
    /// Evaluates the interval-independent constants.
    ///
    /// The contraction factor is taken as `(1 − 1/(č₃č₂))^{1/2}`, the form
    /// that lies in `(0, 1)`; `č₃/č₂` itself always exceeds one.
    pub fn new(cfg: &BoundConfig) -> Result<Self, BoundsError> {
        cfg.validate()?;
        let r = cfg.ratios()?;
        let n = cfg.n as f64;
        let a_check = (2.0 / cfg.r2).min(cfg.q1);
        let b_check = (2.0 / cfg.r1).max(cfg.q2);
        let c1_check = a_check / (1.0 + a_check * b_check);
        let c2_check = (1.0 + a_check * b_check) / a_check;
        let c3_check = 1.0 / c1_check + 1.0 / (cfg.q1 * c1_check * c1_check);
        let x = 1.0 / (c3_check * c2_check);
        if !(x > 0.0 && x < 1.0) {
            return Err(BoundsError::Degenerate { name: "q_bar", value: (1.0 - x).sqrt() });
        }
        let q_bar = (1.0 - x).sqrt();
        Ok(Self {
            a_check,
            b_check,
            c1_check,
            c2_check,
            c3_check,
            t_bar: 2f64.sqrt() * (n - 2.0) * (c2_check / c1_check).sqrt(),
            q_bar,
            q_bar_gap: x / (1.0 + q_bar),
            p_bar: 2.0 * cfg.r2 / cfg.q1 * r.r * cfg.fd.v_m.max(cfg.fd.w) * (cfg.r2 + cfg.q2) + cfg.q2,
            c0: 1f64.max((c2_check / c1_check).sqrt() * cfg.r2 / cfg.q1),
        })
    }
}

/// Rate constants of the observable-interval error contraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    /// `𝔡(d₁, d₂)`.
    pub frak_d: f64,
    /// `â = (d₂/d₁)^{1/2}`.
    pub a_hat: f64,
    /// `q̂ = (1 − 𝔡/d₂)^{1/2}`.
    pub q_hat: f64,
    /// `𝔡/d₂`, from which `1 − q̂` and `ln q̂` are evaluated without
    /// cancellation when `q̂` is close to one.
    pub rate_gap: f64,
}

impl RateConstants {
    /// `1 − q̂`.
    pub fn one_minus_q(&self) -> f64 {
        self.rate_gap / (1.0 + self.q_hat)
    }

    /// `ln q̂`.
    pub fn ln_q(&self) -> f64 {
        0.5 * (-self.rate_gap).ln_1p()
    }
}

/// `𝔡(d₁, d₂) = (d₁⁻¹ + q₁⁻¹ d₁⁻² σ²)⁻¹` with `σ² = max σ²_max(M)` over the
/// observable set, together with `â` and `q̂`.
pub fn rate_constants(d1: f64, d2: f64, q1: f64, sigma_max_sq: f64) -> Result<RateConstants, BoundsError> {
    if !(d1 > 0.0 && d1 <= d2 && d2.is_finite()) {
        return Err(BoundsError::Config(format!("need 0 < d1 <= d2, got d1 = {d1}, d2 = {d2}")));
    }
    let frak_d = 1.0 / (1.0 / d1 + sigma_max_sq / (q1 * d1 * d1));
    let a_hat = (d2 / d1).sqrt();
    let rate_gap = frak_d / d2;
    if !(rate_gap > 0.0 && rate_gap < 1.0) {
        return Err(BoundsError::Degenerate { name: "q_hat", value: (1.0 - rate_gap).sqrt() });
    }
    Ok(RateConstants { frak_d, a_hat, q_hat: (1.0 - rate_gap).sqrt(), rate_gap })
}

/// Upper bound `2(1 + (Δt/Δx · max{v_m, w})²)` on `σ²_max` over the observable set.
pub fn sigma_max_sq_bound(cfg: &BoundConfig) -> Result<f64, BoundsError> {
    let r = cfg.ratios()?;
    Ok(2.0 * (1.0 + (r.r * cfg.fd.v_m.max(cfg.fd.w)).powi(2)))
}

/// Residence-time quantities for one observable interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residence {
    /// Amplification `𝔞`.
    pub frak_a: f64,
    /// Contraction `𝔮`.
    pub frak_q: f64,
    /// Required number of observable steps `𝔱`.
    pub frak_t: f64,
    /// Uniform error bound over the interval.
    pub cap: f64,
    /// Error level guaranteed once the interval is longer than `frak_t`.
    pub terminal: f64,
}

/// Residence time and interval error cap from the rate constants `(𝔞, 𝔮)`,
/// the consensus bound `ĉ`, the target margin `ε` and the error norm at the
/// interval start.
pub fn residence(rate: &RateConstants, c_hat: f64, eps: f64, eta: f64) -> Residence {
    let (frak_a, frak_q) = (rate.a_hat, rate.q_hat);
    let steady = c_hat * frak_a * frak_q / rate.one_minus_q();
    let frak_t = if frak_a * frak_q * eta <= steady {
        0.0
    } else {
        let excess = frak_a * eta - c_hat * frak_a / rate.one_minus_q();
        if excess <= eps {
            0.0
        } else {
            (eps / excess).ln() / rate.ln_q()
        }
    };
    Residence {
        frak_a,
        frak_q,
        frak_t,
        cap: (c_hat + frak_a * frak_q * eta).max(c_hat + steady),
        terminal: eps + c_hat + steady,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_with_half_ratios() {
        let cfg = BoundConfig { fd: ctm::FundamentalDiagram::new(1.0, 1.0, 0.5).unwrap(), ..BoundConfig::normalized(4) };
        let c = analytic_bounds(&cfg).unwrap();
        assert_eq!(c.theta_underline, 0.5);
        assert_eq!(c.theta_tilde, 0.5);
    }

    #[test]
    fn b_bar_first_branch() {
        let mut cfg = BoundConfig::normalized(4);
        cfg.r1 = 1e9;
        cfg.r2 = 2e9;
        let c = analytic_bounds(&cfg).unwrap();
        assert!((c.b_bar - 7.0 * cfg.q2).abs() < 1e-15);
    }

    #[test]
    fn gain_constants_identities() {
        let g = GainConstants::new(&BoundConfig::normalized(5)).unwrap();
        assert!((g.c1_check * g.c2_check - 1.0).abs() < 1e-12);
        assert!(g.c0 >= 1.0);
        assert!(g.q_bar > 0.0 && g.q_bar < 1.0);
        assert!(g.t_bar >= 0.0);
    }

    #[test]
    fn equal_rates_give_unit_amplification() {
        let r = rate_constants(2.0, 2.0, 0.01, 1.5).unwrap();
        assert_eq!(r.a_hat, 1.0);
        assert!(r.q_hat > 0.0 && r.q_hat < 1.0);
        assert!(rate_constants(3.0, 2.0, 0.01, 1.0).is_err());
    }

    #[test]
    fn near_unit_rate_keeps_gap() {
        let r = rate_constants(1e-6, 1e6, 0.01, 1.0).unwrap();
        assert_eq!(r.q_hat, 1.0);
        assert!(r.one_minus_q() > 0.0);
        assert!(r.ln_q() < 0.0);
    }

    #[test]
    fn residence_branches() {
        let rate = RateConstants { frak_d: 0.0, a_hat: 2.0, q_hat: 0.9, rate_gap: 1.0 - 0.81 };
        let small = residence(&rate, 0.01, 0.1, 0.05);
        assert_eq!(small.frak_t, 0.0);
        let big = residence(&rate, 0.01, 0.1, 10.0);
        assert!(big.frak_t > 0.0);
        let looser = residence(&rate, 0.01, 0.5, 10.0);
        assert!(looser.frak_t < big.frak_t);
        // After frak_t steps the geometric bound reaches the terminal level.
        let m = big.frak_t.ceil();
        let u = 0.01 + 10.0 * 2.0 * 0.9f64.powf(m) + 0.01 * 2.0 * 0.9 / 0.1 * (1.0 - 0.9f64.powf(m - 1.0));
        assert!(u <= big.terminal + 1e-12);
    }
}
