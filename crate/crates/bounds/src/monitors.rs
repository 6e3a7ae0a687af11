//! Runtime checks of filter quantities against the bounds.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::eigen_extremes;

/// Which bound a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorKind {
    /// Lower information bound `𝔠₁ I ⪯ Γ⁻¹`.
    InformationLower,
    /// Upper information bound `Γ⁻¹ ⪯ 𝔠₂ I`.
    InformationUpper,
    /// Kalman gain bound `‖K‖_∞ ≤ 𝔨`.
    Gain,
    /// Mean error bound of an unobservable interval.
    UnobservableError,
    /// Mean error cap of a switching schedule.
    ScheduleError,
    /// Estimates did not enter `[−ε, ϱ_m + ε]` before the step cap.
    UltimateBound,
}

/// A monitor that fired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Step index.
    pub k: usize,
    /// Section index.
    pub section: usize,
    /// Violated bound.
    pub kind: MonitorKind,
    /// Observed value.
    pub value: f64,
    /// Bound it was compared against.
    pub bound: f64,
}

/// Checks `c₁ I ⪯ Γ⁻¹ ⪯ c₂ I` with an absolute eigenvalue slack.
pub fn check_information(
    k: usize,
    section: usize,
    cov: &DMatrix<f64>,
    c1: f64,
    c2: f64,
    slack: f64,
) -> Vec<Violation> {
    let (lo, hi) = eigen_extremes(cov);
    let (inv_lo, inv_hi) = (1.0 / hi, 1.0 / lo);
    let mut out = Vec::new();
    if inv_lo < c1 - slack {
        out.push(Violation { k, section, kind: MonitorKind::InformationLower, value: inv_lo, bound: c1 });
    }
    if !(inv_hi <= c2 + slack) {
        out.push(Violation { k, section, kind: MonitorKind::InformationUpper, value: inv_hi, bound: c2 });
    }
    out
}

/// Checks a scalar quantity against an upper bound.
pub fn check_upper(k: usize, section: usize, kind: MonitorKind, value: f64, bound: f64) -> Option<Violation> {
    (!(value <= bound)).then_some(Violation { k, section, kind, value, bound })
}

/// First step from which every later estimate stays inside `[lo, hi]`, or
/// `None` if the last estimate is still outside.
pub fn entry_time<'a, I>(estimates: I, lo: f64, hi: f64) -> Option<usize>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut entry = None;
    for (k, x) in estimates.into_iter().enumerate() {
        let inside = x.iter().all(|&v| v >= lo && v <= hi);
        match (inside, entry) {
            (true, None) => entry = Some(k),
            (false, _) => entry = None,
            _ => {}
        }
    }
    entry
}
