use ctm::{FundamentalDiagram, Grid};
use itertools::Itertools;
use nalgebra::DMatrix;
use smm::{
    all_modes, boundary_output, build_mode_matrices, controllability_matrix, decompose_subsystems, information_matrix,
    numeric_rank, observable_modes, Mode,
};

fn setup() -> (FundamentalDiagram, Grid) {
    (FundamentalDiagram::normalized(), Grid::new(1.0, 0.5, 8).unwrap())
}

fn rank_after(seq: &[DMatrix<f64>], n: usize) -> usize {
    let h = vec![boundary_output(n); seq.len() + 1];
    let r = vec![DMatrix::identity(2, 2); seq.len() + 1];
    numeric_rank(&information_matrix(seq, &h, &r).unwrap(), 1e-10)
}

#[test]
fn banded_invertible_and_row_sums() {
    let (fd, grid) = setup();
    let theta_tilde = (1.0 - 0.5_f64).min(1.0 - 1.0 / 6.0);
    for n in 2..=8 {
        for mode in all_modes(n) {
            let a = build_mode_matrices(mode, n, &fd, &grid).unwrap().a;
            for r in 0..n {
                for c in 0..n {
                    if r.abs_diff(c) > 1 {
                        assert_eq!(a[(r, c)], 0.0, "{mode} n={n}");
                    }
                }
            }
            let det = a.determinant();
            assert!(det > 0.0, "{mode}");
            if mode.is_observable() {
                assert!(det >= theta_tilde.powi(n as i32) - 1e-15, "{mode} n={n} det={det}");
                for row in a.row_iter() {
                    assert!(row.sum() <= 1.0 + 1e-15);
                }
            }
        }
    }
}

#[test]
fn rank_reaches_n_after_t1_observable_steps() {
    let (fd, grid) = setup();
    for n in 2usize..=5 {
        let t1 = 1.max(n.saturating_sub(2));
        let mats: Vec<_> = observable_modes(n).into_iter().map(|m| build_mode_matrices(m, n, &fd, &grid).unwrap().a).collect();
        for seq in (0..t1).map(|_| 0..mats.len()).multi_cartesian_product() {
            let seq: Vec<_> = seq.into_iter().map(|i| mats[i].clone()).collect();
            assert_eq!(rank_after(&seq, n), n, "n={n}");
        }
        if n >= 3 {
            // Tightness: one step fewer of pure freeflow is not enough.
            let ff = vec![mats[0].clone(); t1 - 1];
            assert!(rank_after(&ff, n) < n, "n={n}");
        }
    }
}

#[test]
fn fc_sequences_keep_rank_two() {
    let (fd, grid) = setup();
    for n in 3..=8 {
        let fc: Vec<_> = all_modes(n).into_iter().filter(|m| !m.is_observable()).collect();
        for (i, mode) in fc.iter().enumerate() {
            let other = fc[(i + 1) % fc.len()];
            let seq: Vec<_> = (0..2 * n)
                .map(|k| build_mode_matrices(if k % 2 == 0 { *mode } else { other }, n, &fd, &grid).unwrap().a)
                .collect();
            assert_eq!(rank_after(&seq, n), 2, "n={n} {mode}");
        }
    }
}

#[test]
fn controllability_positive_definite_over_window() {
    let (fd, grid) = setup();
    let n = 5;
    let seq: Vec<_> = observable_modes(n).into_iter().map(|m| build_mode_matrices(m, n, &fd, &grid).unwrap().a).collect();
    let q = vec![DMatrix::identity(n, n) * 0.1; seq.len()];
    let c = controllability_matrix(&seq, &q).unwrap();
    assert_eq!(numeric_rank(&c, 1e-12), n);
    assert!((&c - c.transpose()).abs().max() < 1e-15);
}

#[test]
fn subsystem_blocks() {
    let (fd, grid) = setup();
    let (tv, tw) = (0.5, 1.0 / 6.0);
    for n in 4..=8 {
        for mode in all_modes(n).into_iter().filter(|m| !m.is_observable()) {
            let d = decompose_subsystems(mode, n, &fd, &grid).unwrap();
            assert_eq!(d.a1, DMatrix::identity(2, 2));
            assert!(d.a_check.view((0, 2), (2, n - 2)).iter().all(|&x| x == 0.0));
            let a = build_mode_matrices(mode, n, &fd, &grid).unwrap().a;
            // Direct permutation: interior rows/cols are cells 2..n−1.
            for i in 0..n - 2 {
                for j in 0..n - 2 {
                    assert_eq!(d.a2[(i, j)], a[(i + 1, j + 1)]);
                }
                assert_eq!(d.a21[(i, 0)], a[(i + 1, 0)]);
                assert_eq!(d.a21[(i, 1)], a[(i + 1, n - 1)]);
            }
            let special = mode == Mode::fc1(n - 1) || mode == Mode::fc2(1);
            if !special {
                let nonzeros = d.a21.iter().filter(|&&x| x != 0.0).count();
                assert_eq!(nonzeros, 2, "{mode}");
                assert_eq!(d.a21[(0, 0)], tv);
                assert_eq!(d.a21[(n - 3, 1)], tw);
            }
        }
    }
    let d = decompose_subsystems(Mode::fc1(1), 4, &fd, &grid).unwrap();
    assert_eq!(d.a2.shape(), (2, 2));
    let gamma = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 + i as f64 } else { 0.1 });
    let (g1, g12, g2) = d.covariance_blocks(&gamma);
    assert_eq!(g1[(1, 1)], 4.0);
    assert_eq!(g12[(0, 0)], 0.1);
    assert_eq!(g2[(0, 0)], 2.0);
}
