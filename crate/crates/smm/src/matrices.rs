use ctm::{FundamentalDiagram, Grid};
use nalgebra::{DMatrix, DVector};

use crate::{Mode, ModeTag, SmmError};

/// Dimensionless step ratios `r = dt/dx`, `θ_v = v_m·r` and `θ_w = w·r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratios {
    /// `dt/dx`.
    pub r: f64,
    /// `v_m·dt/dx`.
    pub theta_v: f64,
    /// `w·dt/dx`.
    pub theta_w: f64,
}

impl Ratios {
    /// Derives the ratios, checking the CFL condition.
    pub fn new(fd: &FundamentalDiagram, grid: &Grid) -> Result<Self, SmmError> {
        grid.check_cfl(fd)?;
        let r = grid.ratio();
        Ok(Self { r, theta_v: fd.v_m * r, theta_w: fd.w * r })
    }
}

/// State-transition and affine-input matrices of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SmmMatrices {
    /// Mode the matrices were built for.
    pub mode: Mode,
    /// State transition `A`.
    pub a: DMatrix<f64>,
    /// Input matrix multiplying `1·ρ_m`.
    pub b_rho: DMatrix<f64>,
    /// Input matrix multiplying `1·q_m`.
    pub b_q: DMatrix<f64>,
}

impl SmmMatrices {
    /// Section dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Affine term `B^ρ·1·ρ_m + B^q·1·q_m`.
    pub fn affine(&self, fd: &FundamentalDiagram) -> DVector<f64> {
        let ones = DVector::from_element(self.n(), 1.0);
        &self.b_rho * &ones * fd.rho_m + &self.b_q * &ones * fd.q_m
    }
}

fn theta_raw(p: usize, theta_v: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0 - theta_v
        } else if i == j + 1 {
            theta_v
        } else {
            0.0
        }
    })
}

fn delta_raw(p: usize, theta_w: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0 - theta_w
        } else if j == i + 1 {
            theta_w
        } else {
            0.0
        }
    })
}

fn theta_hat_raw(p: usize, theta_v: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(p + 1, p + 1);
    m[(0, 0)] = 1.0;
    if p > 0 {
        m[(1, 0)] = theta_v;
        m.view_mut((1, 1), (p, p)).copy_from(&theta_raw(p, theta_v));
    }
    m
}

fn delta_hat_raw(p: usize, theta_w: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(p + 1, p + 1);
    m[(p, p)] = 1.0;
    if p > 0 {
        m.view_mut((0, 0), (p, p)).copy_from(&delta_raw(p, theta_w));
        m[(p - 1, p)] = theta_w;
    }
    m
}

/// `Θ_p`: lower bidiagonal with `1 − θ_v` on the diagonal and `θ_v` below.
pub fn build_theta(p: usize, fd: &FundamentalDiagram, grid: &Grid) -> Result<DMatrix<f64>, SmmError> {
    if p == 0 {
        return Err(SmmError::InvalidSize("Θ_p needs p ≥ 1".into()));
    }
    Ok(theta_raw(p, Ratios::new(fd, grid)?.theta_v))
}

/// `Δ_p`: upper bidiagonal with `1 − θ_w` on the diagonal and `θ_w` above.
pub fn build_delta(p: usize, fd: &FundamentalDiagram, grid: &Grid) -> Result<DMatrix<f64>, SmmError> {
    if p == 0 {
        return Err(SmmError::InvalidSize("Δ_p needs p ≥ 1".into()));
    }
    Ok(delta_raw(p, Ratios::new(fd, grid)?.theta_w))
}

/// `Θ̂_p = [[1, 0], [θ_v·e_1, Θ_p]]` of size `p + 1`; `Θ̂_0 = [1]`.
pub fn build_theta_hat(p: usize, fd: &FundamentalDiagram, grid: &Grid) -> Result<DMatrix<f64>, SmmError> {
    Ok(theta_hat_raw(p, Ratios::new(fd, grid)?.theta_v))
}

/// `Δ̂_p = [[Δ_p, θ_w·e_p], [0, 1]]` of size `p + 1`; `Δ̂_0 = [1]`.
pub fn build_delta_hat(p: usize, fd: &FundamentalDiagram, grid: &Grid) -> Result<DMatrix<f64>, SmmError> {
    Ok(delta_hat_raw(p, Ratios::new(fd, grid)?.theta_w))
}

fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut m = DMatrix::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        m.view_mut((at, at), (b.nrows(), b.ncols())).copy_from(b);
        at += b.nrows();
    }
    m
}

/// Builds `A`, `B^ρ` and `B^q` for a legal mode of a section with `n` cells.
pub fn build_mode_matrices(mode: Mode, n: usize, fd: &FundamentalDiagram, grid: &Grid) -> Result<SmmMatrices, SmmError> {
    mode.validate(n)?;
    let Ratios { r, theta_v: tv, theta_w: tw } = Ratios::new(fd, grid)?;
    let mut b_rho = DMatrix::zeros(n, n);
    let mut b_q = DMatrix::zeros(n, n);
    let a = match (mode.tag, mode.s) {
        (ModeTag::FF, _) => theta_hat_raw(n - 1, tv),
        (ModeTag::CC, _) => delta_hat_raw(n - 1, tw),
        (ModeTag::CF, Some(s)) => {
            b_rho[(s - 1, s - 1)] = tw;
            b_q[(s - 1, s)] = -r;
            b_q[(s, s)] = r;
            block_diag(&[&delta_raw(s, tw), &theta_raw(n - s, tv)])
        }
        (ModeTag::FC1, Some(s)) if s == n - 1 => block_diag(&[&theta_hat_raw(n - 2, tv), &DMatrix::identity(1, 1)]),
        (ModeTag::FC2, Some(1)) => block_diag(&[&DMatrix::identity(1, 1), &delta_hat_raw(n - 2, tw)]),
        (ModeTag::FC1 | ModeTag::FC2, Some(s)) => {
            // Sizes of the freeflow block before the middle row and of the
            // congested block after it.
            let (lead, tail) = if mode.tag == ModeTag::FC1 { (s, n - s - 1) } else { (s - 1, n - s) };
            let mut a = DMatrix::zeros(n, n);
            a.view_mut((0, 0), (lead, lead)).copy_from(&theta_hat_raw(lead - 1, tv));
            a[(lead, lead - 1)] = tv;
            a[(lead, lead)] = 1.0;
            a[(lead, lead + 1)] = tw;
            a.view_mut((lead + 1, lead + 1), (tail, tail)).copy_from(&delta_hat_raw(tail - 1, tw));
            b_rho[(lead, lead + 1)] = -tw;
            a
        }
        _ => unreachable!("validated above"),
    };
    Ok(SmmMatrices { mode, a, b_rho, b_q })
}

/// One SMM step `A·ρ + B^ρ·1·ρ_m + B^q·1·q_m`.
pub fn smm_step(rho: &DVector<f64>, matrices: &SmmMatrices, fd: &FundamentalDiagram) -> Result<DVector<f64>, SmmError> {
    if rho.len() != matrices.n() {
        return Err(SmmError::Dimension { expected: matrices.n(), got: rho.len() });
    }
    Ok(&matrices.a * rho + matrices.affine(fd))
}
