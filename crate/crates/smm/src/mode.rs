use std::fmt;

use serde::{Deserialize, Serialize};

use crate::SmmError;

/// Mode family of a section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeTag {
    /// Every cell in freeflow.
    FF,
    /// Every cell congested.
    CC,
    /// Congested upstream part, freeflow downstream part (expansion fan).
    CF,
    /// Freeflow upstream, congested downstream, shock moving downstream or stationary.
    FC1,
    /// Freeflow upstream, congested downstream, shock moving upstream.
    FC2,
}

/// A mode together with its 1-based transition index where applicable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mode {
    /// Mode family.
    pub tag: ModeTag,
    /// Transition index in `1..=n−1` for CF, FC1 and FC2; `None` otherwise.
    pub s: Option<usize>,
}

/// Observability class of a mode under boundary sensing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observability {
    /// FF, CC and CF.
    Observable,
    /// FC1 and FC2.
    Unobservable,
}

impl Mode {
    /// Freeflow mode.
    pub const fn ff() -> Self {
        Self { tag: ModeTag::FF, s: None }
    }

    /// Congested mode.
    pub const fn cc() -> Self {
        Self { tag: ModeTag::CC, s: None }
    }

    /// Congested-to-freeflow mode with transition after cell `s`.
    pub const fn cf(s: usize) -> Self {
        Self { tag: ModeTag::CF, s: Some(s) }
    }

    /// Freeflow-to-congested mode, nonnegative shock speed.
    pub const fn fc1(s: usize) -> Self {
        Self { tag: ModeTag::FC1, s: Some(s) }
    }

    /// Freeflow-to-congested mode, negative shock speed.
    pub const fn fc2(s: usize) -> Self {
        Self { tag: ModeTag::FC2, s: Some(s) }
    }

    /// True for FF, CC and CF.
    pub fn is_observable(&self) -> bool {
        classify_observability(*self) == Observability::Observable
    }

    /// Checks that the transition index is legal for a section of `n` cells.
    pub fn validate(&self, n: usize) -> Result<(), SmmError> {
        let fail = |reason: String| Err(SmmError::IllegalMode { mode: self.to_string(), n, reason });
        if n < 2 {
            return fail("sections need at least 2 cells".into());
        }
        match (self.tag, self.s) {
            (ModeTag::FF | ModeTag::CC, None) => Ok(()),
            (ModeTag::FF | ModeTag::CC, Some(_)) => fail("FF and CC take no transition index".into()),
            (_, None) => fail("a transition index is required".into()),
            (_, Some(s)) if s == 0 || s > n - 1 => fail(format!("s = {s} outside 1..={}", n - 1)),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.s {
            Some(s) => write!(f, "{:?}(s={s})", self.tag),
            None => write!(f, "{:?}", self.tag),
        }
    }
}

/// Observability of a mode when only the boundary cells are measured.
pub fn classify_observability(mode: Mode) -> Observability {
    match mode.tag {
        ModeTag::FF | ModeTag::CC | ModeTag::CF => Observability::Observable,
        ModeTag::FC1 | ModeTag::FC2 => Observability::Unobservable,
    }
}

/// The observable set: FF, CC and CF with `s = 1..n−1` (`n + 1` modes).
pub fn observable_modes(n: usize) -> Vec<Mode> {
    let mut modes = vec![Mode::ff(), Mode::cc()];
    modes.extend((1..n).map(Mode::cf));
    modes
}

/// Every legal `(mode, s)` pair for a section of `n` cells.
pub fn all_modes(n: usize) -> Vec<Mode> {
    let mut modes = observable_modes(n);
    modes.extend((1..n).map(Mode::fc1));
    modes.extend((1..n).map(Mode::fc2));
    modes
}
