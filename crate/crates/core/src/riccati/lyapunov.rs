use super::{rk4_back, Weights};
use crate::error::{QslqError, Result};
use crate::linalg::{adj, adj_dot_mat, hermitian_eigenvalues, symmetrize, Mat};
use crate::qsde::{CoefficientPath, TimeGrid};

/// Solution of `phi' = -(A^* phi + phi A + C^* phi C - M)`, `phi(T) = -G`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointPath {
    /// `phi_0 .. phi_N`.
    pub phi: Vec<Mat>,
    /// Smallest eigenvalue of `R_k - D_k^* phi_k D_k` for each step.
    pub second_order_min_eig: Vec<f64>,
}

pub fn lyapunov_adjoint(
    coeffs: &CoefficientPath,
    weights: &Weights,
    grid: &TimeGrid,
    substeps: usize,
) -> Result<AdjointPath> {
    if substeps == 0 {
        return Err(QslqError::Invalid("substeps must be at least 1".into()));
    }
    coeffs.validate(grid)?;
    weights.validate(grid, coeffs.control_dim)?;
    let n = grid.steps();
    let h = grid.dt() / substeps as f64;
    let mut phi = vec![Mat::zeros((0, 0)); n + 1];
    phi[n] = -weights.g.matrix();
    for k in (0..n).rev() {
        let a = coeffs.a[k].matrix();
        let cm = coeffs.c[k].matrix();
        let m = weights.m[k].matrix();
        let rhs = |x: &Mat| -> Result<Mat> {
            let xa = x.dot(a);
            let cxc = adj_dot_mat(cm, &x.dot(cm));
            let mut out = -(&xa + &adj(&xa) + cxc - m);
            symmetrize(&mut out);
            Ok(out)
        };
        let mut cur = phi[k + 1].clone();
        for _ in 0..substeps {
            cur = rk4_back(&cur, h, rhs)?;
        }
        symmetrize(&mut cur);
        phi[k] = cur;
    }
    let second_order_min_eig = (0..n)
        .map(|k| {
            let d = &coeffs.d[k];
            let form = &weights.r[k] - &adj_dot_mat(d, &phi[k].dot(d));
            hermitian_eigenvalues(&form).first().copied().unwrap_or(0.0)
        })
        .collect();
    Ok(AdjointPath {
        phi,
        second_order_min_eig,
    })
}
