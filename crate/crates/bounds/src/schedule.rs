//! Observable/unobservable interval schedules and their error bounds.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use smm::{Mode, Observability};

use crate::{BoundEngine, BoundsError};

/// One maximal run of steps `(start, end]` in a single observability class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    /// Observability class of every step in the interval.
    pub kind: Observability,
    /// Exclusive start time.
    pub start: usize,
    /// Inclusive end time.
    pub end: usize,
    /// 1-based interval index within its class; an unobservable interval
    /// following the `r`-th observable one has index `r + 1`.
    pub r: usize,
}

impl Interval {
    /// Number of steps in the interval.
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    /// True for an empty interval.
    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Alternating sequence of intervals that partitions the steps `1..=K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalSchedule {
    intervals: Vec<Interval>,
}

impl IntervalSchedule {
    /// Splits per-step observability flags (`flags[k−1]` for step `k`) into
    /// maximal intervals.
    pub fn from_flags(flags: &[bool]) -> Result<Self, BoundsError> {
        if flags.is_empty() {
            return Err(BoundsError::Schedule("no steps".into()));
        }
        let mut intervals = Vec::new();
        let mut start = 0;
        for k in 1..=flags.len() {
            if k == flags.len() || flags[k] != flags[start] {
                let kind = if flags[start] { Observability::Observable } else { Observability::Unobservable };
                let r = 1 + intervals.iter().filter(|i: &&Interval| i.kind == Observability::Observable).count();
                intervals.push(Interval { kind, start, end: k, r });
                start = k;
            }
        }
        Ok(Self { intervals })
    }

    /// Schedule of a mode sequence (`modes[k−1]` active at step `k`).
    pub fn from_modes(modes: &[Mode]) -> Result<Self, BoundsError> {
        Self::from_flags(&modes.iter().map(Mode::is_observable).collect::<Vec<_>>())
    }

    /// The intervals in time order.
    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    /// Last step covered.
    pub fn horizon(&self) -> usize {
        self.intervals.last().map_or(0, |i| i.end)
    }

    /// True when step 1 is in an observable interval.
    pub fn starts_observable(&self) -> bool {
        self.intervals[0].kind == Observability::Observable
    }
}

/// Evaluated bound for one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBound {
    /// The interval.
    pub interval: Interval,
    /// Required observable residence time; `None` for unobservable intervals.
    pub required_residence: Option<f64>,
    /// Whether the residence requirement holds; `None` when it does not
    /// apply or the run ends before the interval could be judged.
    pub satisfied: Option<bool>,
    /// Upper bound on the mean error norm at every step of the interval.
    pub cap: f64,
}

/// Bounds over a whole schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleBounds {
    /// Per-interval results.
    pub intervals: Vec<IntervalBound>,
}

impl ScheduleBounds {
    /// False when some judged residence requirement fails.
    pub fn satisfied(&self) -> bool {
        self.intervals.iter().all(|b| b.satisfied != Some(false))
    }

    /// Cap valid at step `k ≥ 1`.
    pub fn cap_at(&self, k: usize) -> Option<f64> {
        self.intervals.iter().find(|b| b.interval.start < k && k <= b.interval.end).map(|b| b.cap)
    }
}

/// Residence requirements and error caps of a switching schedule.
///
/// `gammas[k]` is the posterior covariance at time `k` for `k = 0..=K`.
/// The first observable interval is judged against `√n ϱ_m` when the run
/// starts observable and against `𝔢₀(Γ₀)` otherwise; later ones against
/// the error level handed over by the preceding unobservable interval.
pub fn schedule_bounds(
    engine: &BoundEngine,
    schedule: &IntervalSchedule,
    gammas: &[DMatrix<f64>],
    delta: f64,
) -> Result<ScheduleBounds, BoundsError> {
    if gammas.len() != schedule.horizon() + 1 {
        return Err(BoundsError::Schedule(format!(
            "need {} covariance snapshots, got {}",
            schedule.horizon() + 1,
            gammas.len()
        )));
    }
    let cfg = engine.config();
    let n = cfg.n as f64;
    let intervals = schedule.intervals();
    let mut out = Vec::with_capacity(intervals.len());
    // Error level entering the next observable interval.
    let mut entering = n.sqrt() * cfg.fd.rho_m;
    // Start of the most recent observable interval.
    let mut last_obs_start: Option<usize> = None;
    for (idx, iv) in intervals.iter().enumerate() {
        match iv.kind {
            Observability::Unobservable => {
                let cap = match last_obs_start {
                    None => engine.initial_error_bound(&gammas[0])?,
                    Some(s) => engine.switching_error_bound(delta, &gammas[s], &gammas[iv.start])?,
                };
                entering = cap;
                out.push(IntervalBound { interval: *iv, required_residence: None, satisfied: None, cap });
            }
            Observability::Observable => {
                let res = engine.residence(delta, entering, &gammas[iv.start])?;
                let len = iv.len() as f64;
                let last = idx + 1 == intervals.len();
                let satisfied = if len > res.frak_t {
                    Some(true)
                } else if last {
                    None
                } else {
                    Some(false)
                };
                out.push(IntervalBound {
                    interval: *iv,
                    required_residence: Some(res.frak_t),
                    satisfied,
                    cap: res.cap,
                });
                last_obs_start = Some(iv.start);
            }
        }
    }
    Ok(ScheduleBounds { intervals: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::BoundConfig;

    #[test]
    fn intervals_partition_steps() {
        let s = IntervalSchedule::from_flags(&[false, false, true, true, true, false, true]).unwrap();
        let iv = s.intervals();
        assert_eq!(iv.len(), 4);
        assert_eq!((iv[0].start, iv[0].end, iv[0].r), (0, 2, 1));
        assert_eq!((iv[1].start, iv[1].end, iv[1].r), (2, 5, 1));
        assert_eq!((iv[2].start, iv[2].end, iv[2].r), (5, 6, 2));
        assert_eq!((iv[3].start, iv[3].end, iv[3].r), (6, 7, 2));
        assert_eq!(s.horizon(), 7);
        assert!(!s.starts_observable());
    }

    #[test]
    fn observable_start_numbering() {
        let s = IntervalSchedule::from_flags(&[true, false, true]).unwrap();
        let r: Vec<_> = s.intervals().iter().map(|i| i.r).collect();
        assert_eq!(r, vec![1, 2, 2]);
    }

    #[test]
    fn always_observable_reduces_to_single_residence() {
        let e = BoundEngine::new(BoundConfig::normalized(3)).unwrap();
        let s = IntervalSchedule::from_modes(&[Mode::ff(); 5]).unwrap();
        let g = vec![DMatrix::identity(3, 3) * 0.1; 6];
        let b = schedule_bounds(&e, &s, &g, 0.05).unwrap();
        assert!(b.satisfied());
        let expected = e.residence(0.05, 3f64.sqrt(), &g[0]).unwrap();
        assert_eq!(b.intervals[0].cap, expected.cap);
        assert_eq!(b.cap_at(3), Some(expected.cap));
        assert_eq!(b.cap_at(6), None);
    }

    #[test]
    fn snapshot_count_checked() {
        let e = BoundEngine::new(BoundConfig::normalized(3)).unwrap();
        let s = IntervalSchedule::from_flags(&[true, true]).unwrap();
        assert!(schedule_bounds(&e, &s, &[DMatrix::identity(3, 3)], 0.05).is_err());
    }
}
