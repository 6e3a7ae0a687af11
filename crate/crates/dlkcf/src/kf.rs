//! Kalman filter prediction and correction on dense Gaussian beliefs.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::FilterError;

/// Mean and covariance of a Gaussian belief.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    /// Mean vector.
    pub mean: DVector<f64>,
    /// Covariance matrix.
    pub cov: DMatrix<f64>,
}

/// Result of a measurement update.
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    /// Posterior belief.
    pub posterior: Gaussian,
    /// Kalman gain.
    pub gain: DMatrix<f64>,
}

impl Gaussian {
    /// Belief with the given mean and covariance.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, FilterError> {
        let n = mean.len();
        if cov.shape() != (n, n) {
            return Err(FilterError::Dimension { what: "covariance", expected: n, got: cov.nrows() });
        }
        Ok(Self { mean, cov })
    }

    /// Dimension of the state.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Replaces `m` by its symmetric part.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>, FilterError> {
    let mut inv = Cholesky::new(m.clone()).ok_or_else(|| FilterError::NotPositiveDefinite(what.to_string()))?.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Time update `x ← A x + offset`, `Γ ← A Γ Aᵀ + Q`.
pub fn kf_predict(
    belief: &Gaussian,
    a: &DMatrix<f64>,
    offset: Option<&DVector<f64>>,
    q: &DMatrix<f64>,
) -> Result<Gaussian, FilterError> {
    let n = belief.dim();
    if a.shape() != (n, n) || q.shape() != (n, n) {
        return Err(FilterError::Dimension { what: "transition or process noise", expected: n, got: a.nrows() });
    }
    let mut mean = a * &belief.mean;
    if let Some(c) = offset {
        mean += c;
    }
    let mut cov = a * &belief.cov * a.transpose() + q;
    symmetrize(&mut cov);
    Ok(Gaussian { mean, cov })
}

/// Measurement update with `z = H x + v`, `v ∼ N(0, R)`.
///
/// With no measurement rows the belief is returned unchanged. The posterior
/// covariance is `Γ − K H Γ`, symmetrized.
pub fn kf_correct(prior: &Gaussian, z: &DVector<f64>, h: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<Correction, FilterError> {
    let n = prior.dim();
    let m = z.len();
    if h.shape() != (m, n) || r.shape() != (m, m) {
        return Err(FilterError::Dimension { what: "measurement model", expected: m, got: h.nrows() });
    }
    if m == 0 {
        return Ok(Correction { posterior: prior.clone(), gain: DMatrix::zeros(n, 0) });
    }
    let ph = &prior.cov * h.transpose();
    let mut s = h * &ph + r;
    symmetrize(&mut s);
    let chol = Cholesky::new(s).ok_or_else(|| FilterError::NotPositiveDefinite("innovation covariance".into()))?;
    let gain = chol.solve(&ph.transpose()).transpose();
    let mean = &prior.mean + &gain * (z - h * &prior.mean);
    let mut cov = &prior.cov - &gain * ph.transpose();
    symmetrize(&mut cov);
    Ok(Correction { posterior: Gaussian { mean, cov }, gain })
}
