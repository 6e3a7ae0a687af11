use nalgebra::{DMatrix, SymmetricEigen};

use crate::BoundsError;

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let e = SymmetricEigen::new(m.clone()).eigenvalues;
    (e.min(), e.max())
}

/// Spectral norm `σ_max(m)`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

/// Checks that `m` is a square symmetric positive definite matrix of size `n`
/// and returns its extreme eigenvalues.
pub fn check_spd(m: &DMatrix<f64>, n: usize) -> Result<(f64, f64), BoundsError> {
    if m.nrows() != n || m.ncols() != n {
        return Err(BoundsError::Dimension { expected: n, rows: m.nrows(), cols: m.ncols() });
    }
    let asym = (m - m.transpose()).abs().max();
    if asym > 1e-9 * m.abs().max().max(1.0) {
        return Err(BoundsError::NotPositiveDefinite(format!("asymmetry {asym:e}")));
    }
    let sym = (m + m.transpose()) * 0.5;
    let (lo, hi) = eigen_extremes(&sym);
    if !(lo > 0.0) {
        return Err(BoundsError::NotPositiveDefinite(format!("smallest eigenvalue {lo:e}")));
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_check() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (lo, hi) = check_spd(&m, 2).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
        assert!(check_spd(&m, 3).is_err());
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(check_spd(&bad, 2), Err(BoundsError::NotPositiveDefinite(_))));
    }

    #[test]
    fn norm_of_rotation_is_one() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((spectral_norm(&m) - 1.0).abs() < 1e-12);
    }
}
