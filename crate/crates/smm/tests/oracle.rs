mod support;

use ctm::{godunov_update, FundamentalDiagram, Grid};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smm::{all_modes, build_mode_matrices, label_mode, smm_step, Mode};
use support::consistent_state;

fn check_equivalence(fd: &FundamentalDiagram, grid: &Grid, states: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for n in 2..=8 {
        for mode in all_modes(n) {
            let m = build_mode_matrices(mode, n, fd, grid).unwrap();
            for _ in 0..states {
                let st = consistent_state(mode, n, fd, &mut rng);
                let ctm = godunov_update(&st.rho, st.ghost_up, st.ghost_down, fd, grid.ratio());
                let smm = smm_step(&DVector::from_vec(st.rho.clone()), &m, fd).unwrap();
                for (a, b) in ctm.iter().zip(smm.iter()) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    worst
}

#[test]
fn smm_matches_ctm_on_consistent_states() {
    let fd = FundamentalDiagram::normalized();
    let grid = Grid::new(1.0, 0.5, 8).unwrap();
    assert!(check_equivalence(&fd, &grid, 200, 1) <= 1e-12);
}

#[test]
fn smm_matches_ctm_for_other_parameters() {
    let fd = FundamentalDiagram::new(1.3, 2.0, 0.6).unwrap();
    let grid = Grid::new(1.0, 0.7, 8).unwrap();
    assert!(check_equivalence(&fd, &grid, 100, 2) <= 1e-12);
}

#[test]
fn cc_jam_is_a_fixed_point() {
    let fd = FundamentalDiagram::normalized();
    let grid = Grid::new(1.0, 0.5, 5).unwrap();
    let m = build_mode_matrices(Mode::cc(), 5, &fd, &grid).unwrap();
    let jam = DVector::from_element(5, fd.rho_m);
    let out = smm_step(&jam, &m, &fd).unwrap();
    let ctm = godunov_update(jam.as_slice(), fd.rho_m, fd.rho_m, &fd, grid.ratio());
    for l in 0..5 {
        assert!((out[l] - fd.rho_m).abs() < 1e-15);
        assert!((ctm[l] - out[l]).abs() < 1e-15);
    }
}

#[test]
fn sampled_non_fc_states_are_labelled_with_their_mode() {
    // FC states are skipped: the middle cell may sit on either side of rho_c.
    let fd = FundamentalDiagram::normalized();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 2..=8 {
        for mode in all_modes(n).into_iter().filter(|m| m.is_observable()) {
            for _ in 0..20 {
                let st = consistent_state(mode, n, &fd, &mut rng);
                let label = label_mode(&DVector::from_vec(st.rho), &fd);
                assert_eq!(label.mode, mode);
            }
        }
    }
}
