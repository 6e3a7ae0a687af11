//! Test-side CTM oracle: random section states consistent with a given mode,
//! together with ghost densities under which the Godunov CTM update of the
//! section coincides with the SMM update.

#![allow(dead_code)]

use ctm::FundamentalDiagram;
use rand::Rng;
use smm::{Mode, ModeTag};

/// A section state plus the ghost densities that make it mode-consistent.
pub struct ConsistentState {
    pub rho: Vec<f64>,
    pub ghost_up: f64,
    pub ghost_down: f64,
}

fn free<R: Rng>(rng: &mut R, fd: &FundamentalDiagram) -> f64 {
    rng.gen_range(0.0..=fd.rho_c)
}

fn congested<R: Rng>(rng: &mut R, fd: &FundamentalDiagram) -> f64 {
    // Strictly above rho_c so the classification is unambiguous.
    rng.gen_range(fd.rho_c..=fd.rho_m).max(fd.rho_c + 1e-9)
}

/// Draws a state of `n` cells consistent with `mode`.
///
/// Zero-gradient ghosts are used except for the FC cases whose boundary cell
/// is held fixed (`FC1` with `s = n−1`, `FC2` with `s = 1`), where the ghost is
/// chosen so that the boundary cell's inflow equals its outflow.
pub fn consistent_state<R: Rng>(mode: Mode, n: usize, fd: &FundamentalDiagram, rng: &mut R) -> ConsistentState {
    let mut rho = vec![0.0; n];
    let (v, w, rm) = (fd.v_m, fd.w, fd.rho_m);
    let mut ghosts = None;
    match (mode.tag, mode.s) {
        (ModeTag::FF, _) => rho.iter_mut().for_each(|x| *x = free(rng, fd)),
        (ModeTag::CC, _) => rho.iter_mut().for_each(|x| *x = congested(rng, fd)),
        (ModeTag::CF, Some(s)) => {
            for (l, x) in rho.iter_mut().enumerate() {
                *x = if l < s { congested(rng, fd) } else { free(rng, fd) };
            }
        }
        (ModeTag::FC1, Some(s)) if s == n - 1 => {
            for x in rho.iter_mut().take(n - 1) {
                *x = free(rng, fd);
            }
            let top = rm - v * rho[n - 2] / w;
            rho[n - 1] = rng.gen_range(fd.rho_c..=top);
            ghosts = Some((rho[0], top));
        }
        (ModeTag::FC2, Some(1)) => {
            for x in rho.iter_mut().skip(1) {
                *x = congested(rng, fd);
            }
            let bottom = w * (rm - rho[1]) / v;
            rho[0] = rng.gen_range(bottom..=rho[1]);
            ghosts = Some((bottom, rho[n - 1]));
        }
        (ModeTag::FC1 | ModeTag::FC2, Some(s)) => {
            // 0-based index of the middle cell.
            let mid = if mode.tag == ModeTag::FC1 { s } else { s - 1 };
            for (l, x) in rho.iter_mut().enumerate() {
                if l < mid {
                    *x = free(rng, fd);
                } else if l > mid {
                    *x = congested(rng, fd);
                }
            }
            let lo = w * (rm - rho[mid + 1]) / v;
            let hi = rm - v * rho[mid - 1] / w;
            rho[mid] = rng.gen_range(lo..=hi);
        }
        _ => unreachable!("legal modes carry an index"),
    }
    let (ghost_up, ghost_down) = ghosts.unwrap_or((rho[0], rho[n - 1]));
    ConsistentState { rho, ghost_up, ghost_down }
}
