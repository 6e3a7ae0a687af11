//! Evaluation quantities: overlap disagreement, estimation error, NEES,
//! the common Lyapunov function and covariance/gain trackers.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::consensus::eigen_extremes;
use crate::{FilterError, PartitionLayout};

/// Average posterior disagreement over all overlaps, each normalized by its
/// size. `None` for a single section.
pub fn disagreement(layout: &PartitionLayout, estimates: &[DVector<f64>]) -> Option<f64> {
    let n = layout.n_sections();
    if n < 2 {
        return None;
    }
    let total: f64 = (0..n - 1)
        .map(|i| {
            let a = layout.project(i, i + 1).expect("neighbors").apply(&estimates[i]);
            let b = layout.project(i + 1, i).expect("neighbors").apply(&estimates[i + 1]);
            (b - a).norm_squared() / layout.overlap(i, i + 1).expect("neighbors").len() as f64
        })
        .sum();
    Some(total / (n - 1) as f64)
}

/// Average squared estimation error per cell, averaged over sections.
pub fn estimation_error(layout: &PartitionLayout, estimates: &[DVector<f64>], truth: &[f64]) -> f64 {
    let n = layout.n_sections();
    let total: f64 = (0..n)
        .map(|i| (&estimates[i] - layout.restrict(i, truth)).norm_squared() / layout.dim(i) as f64)
        .sum();
    total / n as f64
}

/// Cells entering the NEES statistic of a section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NeesSelection {
    /// The first and last cell (two degrees of freedom).
    #[default]
    Boundary,
    /// Every cell of the section.
    Full,
}

impl NeesSelection {
    /// Local indices selected in a section of dimension `n`.
    pub fn indices(&self, n: usize) -> Vec<usize> {
        match self {
            NeesSelection::Boundary => vec![0, n - 1],
            NeesSelection::Full => (0..n).collect(),
        }
    }
}

/// `eᵀ Γ⁻¹ e` on the selected cells; `None` when the marginal covariance is
/// not positive definite.
pub fn nees(error: &DVector<f64>, cov: &DMatrix<f64>, selection: NeesSelection) -> Option<f64> {
    let idx = selection.indices(error.len());
    let e = DVector::from_iterator(idx.len(), idx.iter().map(|&l| error[l]));
    let p = cov.select_rows(idx.iter()).select_columns(idx.iter());
    let chol = Cholesky::new(p)?;
    Some(e.dot(&chol.solve(&e)))
}

/// Two-sided probability region for the run-averaged NEES with `runs`
/// Monte Carlo runs and `dof` degrees of freedom per run.
pub fn nees_region(runs: usize, dof: usize, probability: f64) -> Result<(f64, f64), FilterError> {
    if runs < 2 || dof == 0 || !(0.0..1.0).contains(&probability) {
        return Err(FilterError::Config("NEES region needs at least 2 runs, positive dof and probability in (0, 1)".into()));
    }
    let chi = ChiSquared::new((runs * dof) as f64).map_err(|e| FilterError::Config(e.to_string()))?;
    let tail = (1.0 - probability) / 2.0;
    Ok((chi.inverse_cdf(tail) / runs as f64, chi.inverse_cdf(1.0 - tail) / runs as f64))
}

/// Sums NEES values over Monte Carlo runs per section and step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeesAccumulator {
    sums: Vec<Vec<f64>>,
    counts: Vec<Vec<usize>>,
    excluded: usize,
}

impl NeesAccumulator {
    /// Empty accumulator for `sections × steps` values.
    pub fn new(sections: usize, steps: usize) -> Self {
        Self { sums: vec![vec![0.0; steps]; sections], counts: vec![vec![0; steps]; sections], excluded: 0 }
    }

    /// Adds one run's value; `None` marks an excluded (singular) step.
    pub fn add(&mut self, section: usize, step: usize, value: Option<f64>) {
        match value {
            Some(v) => {
                self.sums[section][step] += v;
                self.counts[section][step] += 1;
            }
            None => self.excluded += 1,
        }
    }

    /// Merges another accumulator of the same shape.
    pub fn merge(&mut self, other: &NeesAccumulator) {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.excluded += other.excluded;
    }

    /// Number of excluded values.
    pub fn excluded(&self) -> usize {
        self.excluded
    }

    /// Run-averaged NEES per step of a section.
    pub fn averages(&self, section: usize) -> Vec<Option<f64>> {
        self.sums[section]
            .iter()
            .zip(&self.counts[section])
            .map(|(s, &c)| (c > 0).then(|| s / c as f64))
            .collect()
    }

    /// Fraction of steps of a section whose average lies outside `region`.
    pub fn violation_fraction(&self, section: usize, region: (f64, f64)) -> f64 {
        let avgs: Vec<f64> = self.averages(section).into_iter().flatten().collect();
        if avgs.is_empty() {
            return 0.0;
        }
        avgs.iter().filter(|&&v| v < region.0 || v > region.1).count() as f64 / avgs.len() as f64
    }
}

/// Common Lyapunov function `Σ_i η̄_iᵀ Γ_i⁻¹ η̄_i`.
pub fn lyapunov(mean_errors: &[DVector<f64>], covs: &[DMatrix<f64>]) -> Result<f64, FilterError> {
    mean_errors
        .iter()
        .zip(covs)
        .enumerate()
        .map(|(i, (e, p))| {
            Cholesky::new(p.clone())
                .map(|c| e.dot(&c.solve(e)))
                .ok_or_else(|| FilterError::NotPositiveDefinite(format!("covariance of section {i}")))
        })
        .sum()
}

/// `‖K‖_∞`: largest absolute row sum.
pub fn gain_inf_norm(k: &DMatrix<f64>) -> f64 {
    k.row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max)
}

/// `(λ_min(Γ⁻¹), λ_max(Γ⁻¹))`.
pub fn inverse_spectrum(cov: &DMatrix<f64>) -> (f64, f64) {
    let (lo, hi) = eigen_extremes(cov);
    (1.0 / hi, 1.0 / lo)
}

/// Metrics of one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// Step index.
    pub k: usize,
    /// Average posterior disagreement `ũ_k`.
    pub disagreement: Option<f64>,
    /// Average squared error `η_k`.
    pub error: f64,
    /// Lyapunov value `V_k` (against the realized error).
    pub lyapunov: Option<f64>,
    /// NEES per section.
    pub nees: Vec<Option<f64>>,
    /// `λ_min(Γ⁻¹)` per section.
    pub inv_cov_min: Vec<f64>,
    /// `λ_max(Γ⁻¹)` per section.
    pub inv_cov_max: Vec<f64>,
    /// `‖K‖_∞` per section.
    pub gain_inf: Vec<f64>,
}

/// Run totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// `ũ = Σ_k ũ_k` (absent for one section).
    pub disagreement: Option<f64>,
    /// `η = Σ_k η_k`.
    pub error: f64,
    /// Number of steps aggregated.
    pub steps: usize,
    /// Computation seconds per agent.
    pub agent_seconds: Vec<f64>,
}

impl RunMetrics {
    /// Aggregates step metrics.
    pub fn from_steps(steps: &[StepMetrics], agent_seconds: Vec<f64>) -> Self {
        let disagreement = steps.iter().map(|s| s.disagreement).sum::<Option<f64>>();
        Self { disagreement, error: steps.iter().map(|s| s.error).sum(), steps: steps.len(), agent_seconds }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disagreement_arithmetic() {
        let l = PartitionLayout::uniform(6, 2, 4, 2).unwrap();
        let a = DVector::from_vec(vec![0.0, 0.0, 0.5, 0.5]);
        let b = DVector::from_vec(vec![0.6, 0.6, 0.0, 0.0]);
        assert!((disagreement(&l, &[a.clone(), b]).unwrap() - 0.01).abs() < 1e-15);
        let same = DVector::from_vec(vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(disagreement(&l, &[a, same]).unwrap(), 0.0);
        let single = PartitionLayout::uniform(4, 1, 4, 0).unwrap();
        assert_eq!(disagreement(&single, &[DVector::zeros(4)]), None);
    }

    #[test]
    fn error_arithmetic() {
        let l = PartitionLayout::uniform(2, 1, 2, 0).unwrap();
        let e = estimation_error(&l, &[DVector::from_vec(vec![0.1, -0.1])], &[0.0, 0.0]);
        assert!((e - 0.01).abs() < 1e-15);
    }

    #[test]
    fn nees_region_reference() {
        let (lo, hi) = nees_region(50, 2, 0.95).unwrap();
        assert!((lo - 1.484).abs() < 2e-3, "{lo}");
        assert!((hi - 2.6).abs() < 0.02, "{hi}");
        assert!(nees_region(1, 2, 0.95).is_err());
    }

    #[test]
    fn zero_error_nees_is_zero() {
        let v = nees(&DVector::zeros(5), &DMatrix::identity(5, 5), NeesSelection::Boundary).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(nees(&DVector::zeros(3), &DMatrix::zeros(3, 3), NeesSelection::Full), None);
    }

    #[test]
    fn totals_are_sums() {
        let mk = |k, d, e| StepMetrics {
            k,
            disagreement: Some(d),
            error: e,
            lyapunov: None,
            nees: vec![],
            inv_cov_min: vec![],
            inv_cov_max: vec![],
            gain_inf: vec![],
        };
        let r = RunMetrics::from_steps(&[mk(1, 0.5, 1.0), mk(2, 0.25, 2.0)], vec![]);
        assert_eq!(r.disagreement, Some(0.75));
        assert_eq!(r.error, 3.0);
    }
}
