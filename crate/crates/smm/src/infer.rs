use ctm::FundamentalDiagram;
use nalgebra::DVector;

use crate::{Mode, ModeTag};

/// Mode read off a density vector together with a consistency flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeLabel {
    /// Best-matching mode.
    pub mode: Mode,
    /// True when the cell pattern has at most one freeflow/congestion
    /// transition, so that the mode describes the state exactly.
    pub consistent: bool,
}

fn leading_run(rho: &DVector<f64>, pred: impl Fn(f64) -> bool) -> usize {
    rho.iter().take_while(|&&x| pred(x)).count()
}

fn trailing_run(rho: &DVector<f64>, pred: impl Fn(f64) -> bool) -> usize {
    rho.iter().rev().take_while(|&&x| pred(x)).count()
}

/// Picks FC1 or FC2 around the transition after freeflow cell `s`.
///
/// The shock moves upstream exactly when the upstream demand exceeds the
/// downstream supply, which is the FC2 regime; otherwise FC1.
fn fc_direction(rho: &DVector<f64>, s: usize, fd: &FundamentalDiagram) -> Mode {
    let demand = fd.v_m * rho[s - 1];
    let supply = fd.w * (fd.rho_m - rho[s]);
    if supply - demand >= 0.0 {
        Mode::fc1(s)
    } else {
        Mode::fc2(s)
    }
}

/// Infers the mode of a section from its boundary measurements.
///
/// The boundary pair fixes the family: a measurement is congested iff it is
/// strictly above `rho_c`. The transition index and the FC direction are
/// estimated from `prior`:
/// * CF: midpoint between the end of the leading congested run and the start
///   of the trailing freeflow run.
/// * FC: `s` is the length of the leading freeflow run; FC2 when the demand
///   of cell `s` exceeds the supply of cell `s + 1`, FC1 otherwise.
///
/// `previous` keeps the last FC transition index when the prior carries no
/// usable shock location (its leading freeflow run is empty or spans the
/// whole section).
pub fn infer_mode(
    z_up: f64,
    z_down: f64,
    previous: Option<Mode>,
    prior: &DVector<f64>,
    fd: &FundamentalDiagram,
) -> Mode {
    let n = prior.len();
    let up_congested = fd.is_congested(z_up);
    let down_congested = fd.is_congested(z_down);
    match (up_congested, down_congested) {
        (false, false) => Mode::ff(),
        (true, true) => Mode::cc(),
        (true, false) => {
            let lead = leading_run(prior, |x| fd.is_congested(x));
            let first_free = n - trailing_run(prior, |x| !fd.is_congested(x)) + 1;
            let s = ((lead + first_free - 1) / 2).clamp(1, n - 1);
            Mode::cf(s)
        }
        (false, true) => {
            let lead = leading_run(prior, |x| !fd.is_congested(x));
            let s = match previous {
                Some(Mode { tag: ModeTag::FC1 | ModeTag::FC2, s: Some(s) }) if (lead == 0 || lead == n) && s < n => s,
                _ => lead.clamp(1, n - 1),
            };
            fc_direction(prior, s, fd)
        }
    }
}

/// Labels a (true) density vector with the mode whose cell pattern it has.
///
/// Vectors with more than one freeflow/congestion transition are labelled by
/// their boundary cells through [`infer_mode`] and flagged inconsistent.
pub fn label_mode(rho: &DVector<f64>, fd: &FundamentalDiagram) -> ModeLabel {
    let n = rho.len();
    let lead_free = leading_run(rho, |x| !fd.is_congested(x));
    let lead_cong = leading_run(rho, |x| fd.is_congested(x));
    let tail_free = trailing_run(rho, |x| !fd.is_congested(x));
    let tail_cong = trailing_run(rho, |x| fd.is_congested(x));
    if lead_free == n {
        return ModeLabel { mode: Mode::ff(), consistent: true };
    }
    if lead_cong == n {
        return ModeLabel { mode: Mode::cc(), consistent: true };
    }
    if lead_cong > 0 && lead_cong + tail_free == n {
        return ModeLabel { mode: Mode::cf(lead_cong), consistent: true };
    }
    if lead_free > 0 && lead_free + tail_cong == n {
        return ModeLabel { mode: fc_direction(rho, lead_free, fd), consistent: true };
    }
    ModeLabel { mode: infer_mode(rho[0], rho[n - 1], None, rho, fd), consistent: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd() -> FundamentalDiagram {
        FundamentalDiagram::normalized()
    }

    #[test]
    fn families_from_boundary_pairs() {
        let prior = DVector::from_element(10, 0.1);
        assert_eq!(infer_mode(0.1, 0.1, None, &prior, &fd()), Mode::ff());
        assert_eq!(infer_mode(0.9, 0.9, None, &prior, &fd()).tag, ModeTag::CC);
        assert_eq!(infer_mode(0.9, 0.1, None, &prior, &fd()).tag, ModeTag::CF);
        assert_eq!(infer_mode(0.25, 0.25, None, &prior, &fd()), Mode::ff());
    }

    #[test]
    fn fc_location_from_prior() {
        let prior = DVector::from_fn(10, |i, _| if i < 4 { 0.1 } else { 0.9 });
        let m = infer_mode(0.1, 0.9, None, &prior, &fd());
        assert_eq!(m.s, Some(4));
        // Demand 0.1 < supply w·0.1 is false here (w·0.1 ≈ 0.033), so the
        // shock moves upstream.
        assert_eq!(m.tag, ModeTag::FC2);
        let prior = DVector::from_fn(10, |i, _| if i < 4 { 0.02 } else { 0.7 });
        assert_eq!(infer_mode(0.02, 0.7, None, &prior, &fd()), Mode::fc1(4));
    }

    #[test]
    fn cf_midpoint() {
        let prior = DVector::from_vec(vec![0.9, 0.9, 0.5, 0.2, 0.3, 0.1, 0.1, 0.1]);
        // Leading congested run ends at cell 3, trailing freeflow run starts
        // at cell 6: midpoint 4.
        assert_eq!(infer_mode(0.9, 0.1, None, &prior, &fd()), Mode::cf(4));
        let consistent = DVector::from_vec(vec![0.9, 0.9, 0.1, 0.1]);
        assert_eq!(infer_mode(0.9, 0.1, None, &consistent, &fd()), Mode::cf(2));
    }

    #[test]
    fn previous_index_kept_when_prior_uninformative() {
        let prior = DVector::from_element(6, 0.9);
        let m = infer_mode(0.1, 0.9, Some(Mode::fc1(3)), &prior, &fd());
        assert_eq!(m.s, Some(3));
    }

    #[test]
    fn labels() {
        let f = fd();
        assert_eq!(label_mode(&DVector::from_vec(vec![0.1, 0.2]), &f).mode, Mode::ff());
        assert_eq!(label_mode(&DVector::from_vec(vec![0.6, 0.6, 0.1]), &f).mode, Mode::cf(2));
        let l = label_mode(&DVector::from_vec(vec![0.1, 0.6, 0.1, 0.6]), &f);
        assert!(!l.consistent);
    }
}
