//! Column-wise fundamental solutions. Column `j` of a flow started at node
//! `k0` is the solution started from the basis vector `e_j` of `H_{k0}`.

use super::{CoefficientPath, TimeGrid};
use crate::clifford::{
    increment_kernel_mat, right_mul_generator_mat, truncate_rows, SuperOperator,
};
use crate::error::{QslqError, Result};
use crate::linalg::{adj_dot_mat, c, Mat, ONE};

/// Flow nodes `k0..=N`, each `2^N x 2^{k0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub start: usize,
    pub nodes: Vec<Mat>,
}

impl Flow {
    pub fn node(&self, k: usize) -> &Mat {
        &self.nodes[k - self.start]
    }

    pub fn width(&self) -> usize {
        self.nodes[0].ncols()
    }
}

fn embedding(dim: usize, k0: usize) -> Mat {
    let w = 1usize << k0;
    Mat::from_shape_fn(
        (dim, w),
        |(i, j)| if i == j { ONE } else { crate::linalg::ZERO },
    )
}

fn check(
    theta: Option<&[Mat]>,
    coeffs: &CoefficientPath,
    grid: &TimeGrid,
    k0: usize,
) -> Result<()> {
    coeffs.validate(grid)?;
    if k0 > grid.steps() {
        return Err(QslqError::FiltrationIndex {
            index: k0,
            modes: grid.steps(),
        });
    }
    if let Some(t) = theta {
        let dim = 1usize << grid.steps();
        if t.len() != grid.steps() || t.iter().any(|m| m.dim() != (coeffs.control_dim, dim)) {
            return Err(QslqError::Dimension("feedback path has wrong shape".into()));
        }
    }
    Ok(())
}

/// `(A + B Theta) X` and `(C + D Theta) X` without forming the closed loop.
fn closed_loop_apply(
    coeffs: &CoefficientPath,
    theta: Option<&[Mat]>,
    k: usize,
    x: &Mat,
) -> (Mat, Mat) {
    let mut drift = coeffs.a[k].matrix().dot(x);
    let mut diff = coeffs.c[k].matrix().dot(x);
    if let Some(t) = theta {
        let u = t[k].dot(x);
        drift += &coeffs.b[k].dot(&u);
        diff += &coeffs.d[k].dot(&u);
    }
    (drift, diff)
}

/// `(C + D Theta)^* X`.
fn closed_loop_diff_adj(coeffs: &CoefficientPath, theta: Option<&[Mat]>, k: usize, x: &Mat) -> Mat {
    let mut out = adj_dot_mat(coeffs.c[k].matrix(), x);
    if let Some(t) = theta {
        out += &adj_dot_mat(&t[k], &adj_dot_mat(&coeffs.d[k], x));
    }
    out
}

/// `(A + B Theta)^* X`.
fn closed_loop_drift_adj(
    coeffs: &CoefficientPath,
    theta: Option<&[Mat]>,
    k: usize,
    x: &Mat,
) -> Mat {
    let mut out = adj_dot_mat(coeffs.a[k].matrix(), x);
    if let Some(t) = theta {
        out += &adj_dot_mat(&t[k], &adj_dot_mat(&coeffs.b[k], x));
    }
    out
}

/// Forward flow `X` of the closed-loop system (open loop when `theta` is
/// `None`).
pub fn flow_forward(
    theta: Option<&[Mat]>,
    coeffs: &CoefficientPath,
    grid: &TimeGrid,
    k0: usize,
) -> Result<Flow> {
    check(theta, coeffs, grid, k0)?;
    let dt = grid.dt();
    let dim = 1usize << grid.steps();
    let mut nodes = vec![embedding(dim, k0)];
    for k in k0..grid.steps() {
        let x = nodes.last().unwrap();
        let (drift, diff) = closed_loop_apply(coeffs, theta, k, x);
        let next = x + &(drift * c(dt)) + right_mul_generator_mat(&diff, k + 1, dt);
        nodes.push(next);
    }
    Ok(Flow { start: k0, nodes })
}

/// Flow `X~` of `dx~ = (-A-B Theta + (C+D Theta)^2)^* x~ dt - (C+D Theta)^* x~ dW`.
pub fn flow_inverse_adjoint(
    theta: Option<&[Mat]>,
    coeffs: &CoefficientPath,
    grid: &TimeGrid,
    k0: usize,
) -> Result<Flow> {
    check(theta, coeffs, grid, k0)?;
    let dt = grid.dt();
    let dim = 1usize << grid.steps();
    let mut nodes = vec![embedding(dim, k0)];
    for k in k0..grid.steps() {
        let x = nodes.last().unwrap();
        let cx = closed_loop_diff_adj(coeffs, theta, k, x);
        let ccx = closed_loop_diff_adj(coeffs, theta, k, &cx);
        let drift = ccx - closed_loop_drift_adj(coeffs, theta, k, x);
        let next = x + &(drift * c(dt)) - right_mul_generator_mat(&cx, k + 1, dt);
        nodes.push(next);
    }
    Ok(Flow { start: k0, nodes })
}

/// Column-wise adjoint pair `(Y-bar, Y~)` of the closed loop: each column
/// solves the backward equation with source `-M x` and terminal `-G x_N`,
/// `x` being the matching column of `x_flow`. `Y~` is indexed by step.
pub fn flow_backward(
    x_flow: &Flow,
    coeffs: &CoefficientPath,
    m_weights: &[SuperOperator],
    g_weight: &SuperOperator,
    grid: &TimeGrid,
) -> Result<(Flow, Flow)> {
    let n = grid.steps();
    let k0 = x_flow.start;
    if x_flow.nodes.len() != n - k0 + 1 || m_weights.len() != n {
        return Err(QslqError::Dimension(
            "flow and weights do not match the grid".into(),
        ));
    }
    let dt = grid.dt();
    let mut y_bar = vec![Mat::zeros((0, 0)); n - k0 + 1];
    let mut y_tilde = vec![Mat::zeros((0, 0)); n - k0];
    y_bar[n - k0] = -g_weight.matrix().dot(x_flow.node(n));
    for k in (k0..n).rev() {
        let next = &y_bar[k + 1 - k0];
        let yy = increment_kernel_mat(next, k, dt);
        let drift = adj_dot_mat(coeffs.a[k].matrix(), next)
            + adj_dot_mat(coeffs.c[k].matrix(), &yy)
            - m_weights[k].matrix().dot(x_flow.node(k));
        let mut yk = next + &(drift * c(dt));
        truncate_rows(&mut yk, k);
        y_bar[k - k0] = yk;
        y_tilde[k - k0] = yy;
    }
    Ok((
        Flow {
            start: k0,
            nodes: y_bar,
        },
        Flow {
            start: k0,
            nodes: y_tilde,
        },
    ))
}

/// Experimental propagator that reads the diffusion as `(C + D Theta) X P dW`
/// with `P` the parity of the initial data. Returns the flow and the largest
/// deviation from [`flow_forward`].
pub fn flow_forward_parity_form(
    theta: Option<&[Mat]>,
    coeffs: &CoefficientPath,
    grid: &TimeGrid,
    k0: usize,
) -> Result<(Flow, f64)> {
    let reference = flow_forward(theta, coeffs, grid, k0)?;
    let dt = grid.dt();
    let dim = 1usize << grid.steps();
    let w = 1usize << k0;
    let mut nodes = vec![embedding(dim, k0)];
    for k in k0..grid.steps() {
        let x = nodes.last().unwrap();
        let mut xp = x.clone();
        for (j, mut col) in xp.axis_iter_mut(ndarray::Axis(1)).enumerate() {
            if j.count_ones() % 2 == 1 {
                col.mapv_inplace(|z| -z);
            }
        }
        let (drift, _) = closed_loop_apply(coeffs, theta, k, x);
        let (_, diff) = closed_loop_apply(coeffs, theta, k, &xp);
        nodes.push(x + &(drift * c(dt)) + right_mul_generator_mat(&diff, k + 1, dt));
    }
    debug_assert_eq!(nodes[0].ncols(), w);
    let gap = nodes
        .iter()
        .zip(&reference.nodes)
        .map(|(a, b)| crate::linalg::fro_norm(&(a - b)))
        .fold(0.0, f64::max);
    Ok((Flow { start: k0, nodes }, gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{adj, fro_norm, identity};

    #[test]
    fn zero_coefficients_give_identity_embedding() {
        let g = TimeGrid::new(0.0, 1.0, 3).unwrap();
        let co = CoefficientPath::zero(&g, 1);
        for k0 in [0, 2] {
            let f = flow_forward(None, &co, &g, k0).unwrap();
            let ft = flow_inverse_adjoint(None, &co, &g, k0).unwrap();
            for k in k0..=3 {
                assert_eq!(f.node(k), &embedding(8, k0));
                assert_eq!(ft.node(k), &embedding(8, k0));
            }
        }
    }

    #[test]
    fn drift_only_duality_is_tight() {
        let n = 4;
        let g = TimeGrid::new(0.0, 1.0, n).unwrap();
        let mut co = CoefficientPath::zero(&g, 1);
        let mut a = Mat::zeros((16, 16));
        a[(0, 0)] = c(-0.7);
        a[(1, 1)] = c(0.4);
        a[(0, 1)] = c(0.2);
        co.a = vec![SuperOperator::general(a).unwrap(); n];
        let x = flow_forward(None, &co, &g, 1).unwrap();
        let xt = flow_inverse_adjoint(None, &co, &g, 1).unwrap();
        let defect = fro_norm(&(adj(xt.node(n)).dot(x.node(n)) - identity(2)));
        // Euler duality error is O(dt^2) per step here.
        assert!(defect < 0.1, "defect {defect}");
    }
}
