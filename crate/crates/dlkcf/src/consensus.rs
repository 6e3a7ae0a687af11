//! Consensus gain and the two caps on its scaling factor: `γ*` preserving
//! the decrease of the common Lyapunov function and `γ̂` bounding the size of
//! the consensus correction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::kf::{spd_inverse, symmetrize};
use crate::{FilterError, PartitionLayout, Projection};

/// How the scaling factor of each consensus link is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaRule {
    /// `backoff · min{γ*_i, γ*_j, γ̂^j_i, γ̂^i_j}` with magnitude budget `c_hat`.
    Bounded { backoff: f64, c_hat: f64 },
    /// `backoff · min{γ*_i, γ*_j}`; no magnitude cap.
    StabilityOnly { backoff: f64 },
    /// The same constant on every active link.
    Fixed { gamma: f64 },
    /// `kappa / λ_max(Γ_{i,k|k−1})` chosen by each agent from its own prior.
    PriorNormalized { kappa: f64 },
}

impl Default for GammaRule {
    fn default() -> Self {
        GammaRule::Bounded { backoff: 0.99, c_hat: 0.01 }
    }
}

impl GammaRule {
    /// Checks that the rule's parameters are usable.
    pub fn validate(&self) -> Result<(), FilterError> {
        let ok = match *self {
            GammaRule::Bounded { backoff, c_hat } => backoff > 0.0 && backoff < 1.0 && c_hat > 0.0,
            GammaRule::StabilityOnly { backoff } => backoff > 0.0 && backoff < 1.0,
            GammaRule::Fixed { gamma } => gamma >= 0.0,
            GammaRule::PriorNormalized { kappa } => kappa >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(FilterError::Config(format!("invalid scaling rule {self:?}")))
        }
    }
}

/// Smallest and largest eigenvalues of a symmetric matrix.
pub fn eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (f64::INFINITY, f64::NEG_INFINITY);
    }
    let e = m.symmetric_eigenvalues();
    (e.min(), e.max())
}

/// `S = Hᵀ R⁻¹ H`.
pub fn measurement_information(h: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>, FilterError> {
    if h.nrows() == 0 {
        return Ok(DMatrix::zeros(h.ncols(), h.ncols()));
    }
    let mut s = h.transpose() * spd_inverse(r, "measurement covariance")? * h;
    symmetrize(&mut s);
    Ok(s)
}

/// `Λ = P⁻¹ − (P + W)⁻¹` with `P = A Γ_{k−1|k−1} Aᵀ` and
/// `W = Q + Γ_{k|k−1} S Γ_{k|k−1}`.
pub fn lambda_matrix(
    propagated: &DMatrix<f64>,
    q: &DMatrix<f64>,
    prior_cov: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> Result<DMatrix<f64>, FilterError> {
    let w = q + prior_cov * s * prior_cov;
    lambda_from_g(propagated, &(propagated + w))
}

/// `Λ = P⁻¹ − G⁻¹`, using `P + W = Γ_{k|k−1} + Γ_{k|k−1} S Γ_{k|k−1} = G`.
pub fn lambda_from_g(propagated: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DMatrix<f64>, FilterError> {
    let mut lam = spd_inverse(propagated, "propagated covariance")? - spd_inverse(g, "P + W")?;
    symmetrize(&mut lam);
    Ok(lam)
}

/// `G = A Γ_{k−1|k−1} Aᵀ + Q + Γ_{k|k−1} S Γ_{k|k−1} = Γ_{k|k−1} + Γ_{k|k−1} S Γ_{k|k−1}`.
pub fn g_matrix(prior_cov: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = prior_cov + prior_cov * s * prior_cov;
    symmetrize(&mut g);
    g
}

/// Per-cell weights `c + c²` where `c` counts the overlaps containing the cell.
///
/// The stacked disagreement operator of an agent satisfies
/// `H̃ L̃ L̃ᵀ H̃ᵀ = diag(weights)`, so these weights carry all the geometry
/// the stability cap needs.
pub fn overlap_weights(layout: &PartitionLayout, i: usize) -> DVector<f64> {
    DVector::from_iterator(layout.dim(i), layout.overlap_counts(i).into_iter().map(|c| (c + c * c) as f64))
}

/// `λ_max(L̃ᵀ H̃ᵀ G H̃ L̃)`, evaluated as `λ_max(D^{1/2} G D^{1/2})` on the
/// overlap cells with `D = diag(weights)`.
pub fn stability_denominator(g: &DMatrix<f64>, weights: &DVector<f64>) -> f64 {
    let support: Vec<usize> = (0..weights.len()).filter(|&l| weights[l] > 0.0).collect();
    if support.is_empty() {
        return 0.0;
    }
    let m = DMatrix::from_fn(support.len(), support.len(), |a, b| {
        let (la, lb) = (support[a], support[b]);
        weights[la].sqrt() * g[(la, lb)] * weights[lb].sqrt()
    });
    eigen_extremes(&m).1
}

/// `γ* = (λ_min(Λ_𝒥) / λ_max(L̃ᵀ H̃ᵀ G H̃ L̃))^{1/2}`.
///
/// Returns `0` when `λ_min(Λ_𝒥)` is not positive and `+∞` when the agent has
/// no overlap.
pub fn gamma_star(lambda_min_joint: f64, denominator: f64) -> f64 {
    if !(lambda_min_joint > 0.0) {
        0.0
    } else if denominator <= 0.0 {
        f64::INFINITY
    } else {
        (lambda_min_joint / denominator).sqrt()
    }
}

/// `γ̂^j_i = ĉ |𝒩_i|⁻¹ ‖Γ_{i,k|k−1} Î_{i,j}ᵀ u^j_i‖⁻¹`; `+∞` for zero disagreement.
pub fn gamma_hat(c_hat: f64, n_neighbors: usize, prior_cov: &DMatrix<f64>, proj: &Projection, u: &DVector<f64>) -> f64 {
    let norm = (prior_cov * proj.apply_transpose(u)).norm();
    if norm == 0.0 || n_neighbors == 0 {
        f64::INFINITY
    } else {
        c_hat / (n_neighbors as f64 * norm)
    }
}

/// `C^j_i = γ Γ_{i,k|k−1} Î_{i,j}ᵀ`.
pub fn consensus_gain(gamma: f64, prior_cov: &DMatrix<f64>, proj: &Projection) -> DMatrix<f64> {
    proj.right_transpose(prior_cov) * gamma
}
