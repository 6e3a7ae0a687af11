//! Sequence extremization for the steady covariance bounds.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smm::{boundary_output, build_mode_matrices, observable_modes};

use crate::linalg::eigen_extremes;
use crate::{BoundConfig, BoundsError};

/// How the mode sequences were covered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    /// Every sequence was evaluated.
    Exhaustive,
    /// A uniform random sample was evaluated; the values are estimates.
    Sampled,
}

/// Information and controllability extremes and the derived bounds
/// `c₁ I < Γ⁻¹ < c₂ I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremizedBounds {
    /// Window length `T₁`.
    #[serde(rename = "T1")]
    pub t1: usize,
    /// Lower information bound.
    pub a_info: f64,
    /// Upper information bound.
    pub b_info: f64,
    /// Lower controllability bound.
    pub a_ctrl: f64,
    /// Upper controllability bound.
    pub b_ctrl: f64,
    /// `min{a_info, a_ctrl}`.
    pub a: f64,
    /// `max{b_info, b_ctrl}`.
    pub b: f64,
    /// `a/(1 + ab)`.
    pub c1: f64,
    /// `(1 + ab)/a`.
    pub c2: f64,
    /// Whether the extremes are exact or sampled.
    pub coverage: Coverage,
    /// Number of sequences evaluated for the information extremes.
    pub sequences: usize,
}

/// Raw spectral extremes over the sequence set, before scaling by the noise
/// bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceExtremes {
    /// `min λ_min(H_bᵀH_b + Σ P_ιᵀ H_bᵀH_b P_ι)`.
    pub info_min: f64,
    /// `max λ_max(I + Σ P_ιᵀ P_ι)`.
    pub info_max: f64,
    /// `min λ_min(I + Σ Π_ι Π_ιᵀ)`.
    pub ctrl_min: f64,
    /// `max λ_max(I + Σ Π_ι Π_ιᵀ)`.
    pub ctrl_max: f64,
}

#[derive(Debug, Clone, Copy)]
struct MinMax(f64, f64);

impl MinMax {
    const EMPTY: MinMax = MinMax(f64::INFINITY, f64::NEG_INFINITY);

    fn merge(self, o: MinMax) -> MinMax {
        MinMax(self.0.min(o.0), self.1.max(o.1))
    }
}

fn digits(mut index: usize, base: usize, len: usize) -> Vec<usize> {
    let mut d = vec![0; len];
    for slot in d.iter_mut().rev() {
        *slot = index % base;
        index /= base;
    }
    d
}

/// `H_bᵀH_b + Σ_ι P_ιᵀH_bᵀH_b P_ι` and `I + Σ_ι P_ιᵀP_ι` with
/// `P_ι = M_ι⁻¹ M_{ι+1}⁻¹ ⋯ M_T⁻¹`.
fn information_pair(inverses: &[DMatrix<f64>], seq: &[usize], hth: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = hth.nrows();
    let mut p = DMatrix::identity(n, n);
    let mut with_h = hth.clone();
    let mut full = DMatrix::identity(n, n);
    for &m in seq.iter().rev() {
        p = &inverses[m] * p;
        with_h += p.transpose() * hth * &p;
        full += p.transpose() * &p;
    }
    (with_h, full)
}

/// `I + Σ_ι Π_ι Π_ιᵀ` for both product orders: `Π_ι = M_ι ⋯ M_L` and
/// `Π_ι = M_L ⋯ M_ι`.
fn controllability_pair(mats: &[DMatrix<f64>], seq: &[usize]) -> [DMatrix<f64>; 2] {
    let n = mats[0].nrows();
    let mut ascending = DMatrix::identity(n, n);
    let mut descending = DMatrix::identity(n, n);
    let mut out = [DMatrix::identity(n, n), DMatrix::identity(n, n)];
    for &m in seq.iter().rev() {
        ascending = &mats[m] * ascending;
        descending *= &mats[m];
        out[0] += &ascending * ascending.transpose();
        out[1] += &descending * descending.transpose();
    }
    out
}

fn extremes_over<F>(count: usize, len: usize, base: usize, cfg: &BoundConfig, eval: F) -> (MinMax, MinMax, Coverage, usize)
where
    F: Fn(&[usize]) -> (MinMax, MinMax) + Sync,
{
    let total = (base as u128).checked_pow(len as u32);
    let exhaustive = cfg.n <= cfg.exhaustive_limit && total.is_some_and(|t| t <= usize::MAX as u128);
    let reduce = |a: (MinMax, MinMax), b: (MinMax, MinMax)| (a.0.merge(b.0), a.1.merge(b.1));
    let empty = || (MinMax::EMPTY, MinMax::EMPTY);
    if exhaustive {
        let result = (0..count).into_par_iter().map(|i| eval(&digits(i, base, len))).reduce(empty, reduce);
        (result.0, result.1, Coverage::Exhaustive, count)
    } else {
        let samples = cfg.samples;
        let chunk = 1024;
        let result = (0..samples.div_ceil(chunk))
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(c as u64);
                let mut acc = empty();
                for _ in 0..chunk.min(samples - c * chunk) {
                    let seq: Vec<usize> = (0..len).map(|_| rng.gen_range(0..base)).collect();
                    acc = reduce(acc, eval(&seq));
                }
                acc
            })
            .reduce(empty, reduce);
        (result.0, result.1, Coverage::Sampled, samples)
    }
}

/// Extremes of the information and controllability spectra over all
/// observable mode sequences of the window length.
///
/// Modes may mix freely across the window. Sections up to
/// `exhaustive_limit` cells are enumerated exhaustively; larger sections are
/// sampled with `samples` uniform random sequences.
pub fn sequence_extremes(cfg: &BoundConfig) -> Result<(SequenceExtremes, Coverage, usize), BoundsError> {
    cfg.validate()?;
    let n = cfg.n;
    let grid = cfg.grid()?;
    let mats = observable_modes(n)
        .into_iter()
        .map(|m| build_mode_matrices(m, n, &cfg.fd, &grid).map(|s| s.a))
        .collect::<Result<Vec<_>, _>>()?;
    let inverses = mats
        .iter()
        .enumerate()
        .map(|(i, a)| a.clone().try_inverse().ok_or(BoundsError::Smm(smm::SmmError::Singular(i))))
        .collect::<Result<Vec<_>, _>>()?;
    let hb = boundary_output(n);
    let hth = hb.transpose() * hb;
    let base = mats.len();
    let t1 = cfg.t1();

    let info_count = base.saturating_pow(t1 as u32);
    let (info_lo, info_hi, coverage, sequences) = extremes_over(info_count, t1, base, cfg, |seq| {
        let (with_h, full) = information_pair(&inverses, seq, &hth);
        let lo = eigen_extremes(&with_h).0;
        let hi = eigen_extremes(&full).1;
        (MinMax(lo, lo), MinMax(hi, hi))
    });

    let ctrl_len = t1 - 1;
    let ctrl_count = base.saturating_pow(ctrl_len as u32);
    let (ctrl, _, _, _) = extremes_over(ctrl_count, ctrl_len, base, cfg, |seq| {
        let pair = controllability_pair(&mats, seq);
        let (a0, b0) = eigen_extremes(&pair[0]);
        let (a1, b1) = eigen_extremes(&pair[1]);
        (MinMax(a0.min(a1), b0.max(b1)), MinMax::EMPTY)
    });
    Ok((
        SequenceExtremes { info_min: info_lo.0, info_max: info_hi.1, ctrl_min: ctrl.0, ctrl_max: ctrl.1 },
        coverage,
        sequences,
    ))
}

/// Steady covariance bounds: `a_ℐ = r₂⁻¹·info_min`, `b_ℐ = r₁⁻¹·info_max`,
/// `a_𝒞 = q₁·ctrl_min`, `b_𝒞 = q₂·ctrl_max`, `c₁ = a/(1+ab)` and
/// `c₂ = (1+ab)/a`.
pub fn extremized_bounds(cfg: &BoundConfig) -> Result<ExtremizedBounds, BoundsError> {
    let (x, coverage, sequences) = sequence_extremes(cfg)?;
    Ok(bounds_from_extremes(cfg, &x, coverage, sequences))
}

/// Scales precomputed spectral extremes into [`ExtremizedBounds`].
pub fn bounds_from_extremes(cfg: &BoundConfig, x: &SequenceExtremes, coverage: Coverage, sequences: usize) -> ExtremizedBounds {
    let a_info = x.info_min / cfg.r2;
    let b_info = x.info_max / cfg.r1;
    let (a_ctrl, b_ctrl) = if cfg.t1() == 1 { (cfg.q1, cfg.q2) } else { (cfg.q1 * x.ctrl_min, cfg.q2 * x.ctrl_max) };
    let a = a_info.min(a_ctrl);
    let b = b_info.max(b_ctrl);
    ExtremizedBounds {
        t1: cfg.t1(),
        a_info,
        b_info,
        a_ctrl,
        b_ctrl,
        a,
        b,
        c1: a / (1.0 + a * b),
        c2: (1.0 + a * b) / a,
        coverage,
        sequences,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digit_decoding() {
        assert_eq!(digits(0, 3, 2), vec![0, 0]);
        assert_eq!(digits(5, 3, 2), vec![1, 2]);
        assert_eq!(digits(8, 3, 2), vec![2, 2]);
    }

    #[test]
    fn short_window_uses_noise_bounds() {
        let cfg = BoundConfig::normalized(2);
        let b = extremized_bounds(&cfg).unwrap();
        assert_eq!(b.t1, 1);
        assert_eq!((b.a_ctrl, b.b_ctrl), (cfg.q1, cfg.q2));
        assert_eq!(b.coverage, Coverage::Exhaustive);
        assert_eq!(b.sequences, 3);
    }

    #[test]
    fn derived_constants_relations() {
        let b = extremized_bounds(&BoundConfig::normalized(4)).unwrap();
        assert_eq!(b.a, b.a_info.min(b.a_ctrl));
        assert_eq!(b.b, b.b_info.max(b.b_ctrl));
        assert!(0.0 < b.c1 && b.c1 < b.c2);
        assert!((b.c1 * b.c2 - 1.0).abs() < 1e-12);
        assert!(b.b > b.a);
    }

    #[test]
    fn sampling_above_limit() {
        let mut cfg = BoundConfig::normalized(5);
        cfg.exhaustive_limit = 4;
        cfg.samples = 300;
        let sampled = extremized_bounds(&cfg).unwrap();
        assert_eq!(sampled.coverage, Coverage::Sampled);
        assert_eq!(sampled.sequences, 300);
        let exact = extremized_bounds(&BoundConfig::normalized(5)).unwrap();
        assert!(sampled.a_info >= exact.a_info && sampled.b_info <= exact.b_info);
        let again = extremized_bounds(&cfg).unwrap();
        assert_eq!(sampled, again);
    }
}
