use nalgebra::{DMatrix, SymmetricEigen};

use crate::SmmError;

/// Output matrix of boundary sensing: rows `e_1ᵀ` and `e_nᵀ`.
pub fn boundary_output(n: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(2, n);
    h[(0, 0)] = 1.0;
    h[(1, n - 1)] = 1.0;
    h
}

fn inverse(a: &DMatrix<f64>, pos: usize) -> Result<DMatrix<f64>, SmmError> {
    a.clone().try_inverse().ok_or(SmmError::Singular(pos))
}

/// Information matrix over the window `[k_0, k_1]`:
/// `ℐ = Σ_{k=k_0}^{k_1} Ξ_{k,k_1}ᵀ H_kᵀ R_k⁻¹ H_k Ξ_{k,k_1}` with
/// `Ξ_{k,k_1} = A_k⁻¹·A_{k+1}⁻¹ ⋯ A_{k_1−1}⁻¹`.
///
/// `a_seq` holds `A_{k_0} … A_{k_1−1}`; `h_seq` and `r_seq` hold one entry per
/// time index `k_0 … k_1`, so they are one longer than `a_seq`.
pub fn information_matrix(
    a_seq: &[DMatrix<f64>],
    h_seq: &[DMatrix<f64>],
    r_seq: &[DMatrix<f64>],
) -> Result<DMatrix<f64>, SmmError> {
    let window = a_seq.len();
    if h_seq.len() != window + 1 || r_seq.len() != window + 1 {
        return Err(SmmError::Dimension { expected: window + 1, got: h_seq.len().min(r_seq.len()) });
    }
    let n = h_seq[0].ncols();
    let mut xi = DMatrix::identity(n, n);
    let term = |k: usize, xi: &DMatrix<f64>| -> Result<DMatrix<f64>, SmmError> {
        let r_inv = inverse(&r_seq[k], k).map_err(|_| SmmError::SingularNoise(k))?;
        let hx = &h_seq[k] * xi;
        Ok(hx.transpose() * r_inv * hx)
    };
    let mut info = term(window, &xi)?;
    for k in (0..window).rev() {
        xi = inverse(&a_seq[k], k)? * xi;
        info += term(k, &xi)?;
    }
    Ok(info)
}

/// Controllability matrix over `[k_0, k_1]`:
/// `𝒞 = Σ_{k=k_0}^{k_1−1} Ξ_{k_1,k+1} Q_{k+1} Ξ_{k_1,k+1}ᵀ` with
/// `Ξ_{k_1,k+1} = A_{k_1−1} ⋯ A_{k+1}`.
///
/// `a_seq` holds `A_{k_0} … A_{k_1−1}` and `q_seq` holds `Q_{k_0+1} … Q_{k_1}`.
pub fn controllability_matrix(a_seq: &[DMatrix<f64>], q_seq: &[DMatrix<f64>]) -> Result<DMatrix<f64>, SmmError> {
    let window = a_seq.len();
    if q_seq.len() != window {
        return Err(SmmError::Dimension { expected: window, got: q_seq.len() });
    }
    let n = q_seq.first().map_or(0, |q| q.nrows());
    let mut ctrl = DMatrix::zeros(n, n);
    let mut xi = DMatrix::identity(n, n);
    for k in (0..window).rev() {
        ctrl += &xi * &q_seq[k] * xi.transpose();
        xi = &xi * &a_seq[k];
    }
    Ok(ctrl)
}

/// Numerical rank of a symmetric positive semidefinite matrix: the number of
/// eigenvalues above `tol·λ_max`.
pub fn numeric_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let eig = SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()));
    if top == 0.0 {
        return 0;
    }
    eig.eigenvalues.iter().filter(|&&x| x > tol * top).count()
}
