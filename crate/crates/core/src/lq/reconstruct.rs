//! `P` rebuilt from the closed-loop flows: `P^ = -Y-bar X~^*` and
//! `Pi^ = -Y~ X~^*`, compared with the Riccati path on the range reachable
//! from `H_{k0}`.

use super::ProblemSpec;
use crate::error::{QslqError, Result};
use crate::linalg::{adj, adj_dot_mat, op_norm, singular_range, Mat};
use crate::qsde::{flow_backward, flow_forward, flow_inverse_adjoint, Flow};
use crate::riccati::{GainPath, RiccatiPath};

/// Condition number of `X~_k` above which the reconstruction is refused.
pub const MAX_FLOW_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub start: usize,
    pub x: Flow,
    pub x_tilde: Flow,
    pub y_bar: Flow,
    pub y_tilde: Flow,
    /// `P^_k` for nodes `k0..=N`.
    pub p_hat: Vec<Mat>,
    /// `Pi^_k` for steps `k0..N`.
    pub pi_hat: Vec<Mat>,
    /// `||X~_k^* X_k - I||` per node.
    pub duality: Vec<f64>,
    /// `||(P^_k - P_k) X_k||` per node.
    pub p_error: Vec<f64>,
    /// `||X_k^* (P^_k - P^_k^*) X_k||` per node.
    pub hermitian_defect: Vec<f64>,
    /// `||(R Theta + B^* P^ + D^* Pi^) X_k||` per step.
    pub residual_gain: Vec<f64>,
    /// `||(Pi^ - P^ (C + D Theta)) X_k||` per step.
    pub residual_pi: Vec<f64>,
}

impl Reconstruction {
    pub fn max(v: &[f64]) -> f64 {
        v.iter().copied().fold(0.0, f64::max)
    }
}

pub fn flow_reconstruct_p(
    spec: &ProblemSpec,
    path: &RiccatiPath,
    gains: &GainPath,
    k0: usize,
) -> Result<Reconstruction> {
    spec.validate()?;
    let n = spec.steps();
    if k0 >= n {
        return Err(QslqError::FiltrationIndex {
            index: k0,
            modes: n,
        });
    }
    let grid = &spec.grid;
    let theta = Some(gains.theta.as_slice());
    let x = flow_forward(theta, &spec.coeffs, grid, k0)?;
    let x_tilde = flow_inverse_adjoint(theta, &spec.coeffs, grid, k0)?;
    for (i, node) in x_tilde.nodes.iter().enumerate() {
        let (lo, hi) = singular_range(node);
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if cond > MAX_FLOW_CONDITION {
            return Err(QslqError::IllConditioned { node: k0 + i, cond });
        }
    }
    let (y_bar, y_tilde) = flow_backward(&x, &spec.coeffs, &spec.weights.m, &spec.weights.g, grid)?;

    let w = x.width();
    let eye = Mat::eye(w);
    let mut p_hat = Vec::new();
    let mut duality = Vec::new();
    let mut p_error = Vec::new();
    let mut herm = Vec::new();
    for k in k0..=n {
        let xt = x_tilde.node(k);
        let xk = x.node(k);
        let ph = -y_bar.node(k).dot(&adj(xt));
        duality.push(op_norm(&(adj_dot_mat(xt, xk) - &eye)));
        p_error.push(op_norm(&(&ph - &path.p[k]).dot(xk)));
        let skew = &ph - &adj(&ph);
        herm.push(op_norm(&adj_dot_mat(xk, &skew.dot(xk))));
        p_hat.push(ph);
    }
    let mut pi_hat = Vec::new();
    let mut residual_gain = Vec::new();
    let mut residual_pi = Vec::new();
    for k in k0..n {
        let xt = x_tilde.node(k);
        let xk = x.node(k);
        let pi = -y_tilde.node(k).dot(&adj(xt));
        let ph = &p_hat[k - k0];
        let th = &gains.theta[k];
        let b = &spec.coeffs.b[k];
        let d = &spec.coeffs.d[k];
        let gain = spec.weights.r[k].dot(th) + adj_dot_mat(b, ph) + adj_dot_mat(d, &pi);
        residual_gain.push(op_norm(&gain.dot(xk)));
        let cl = spec.coeffs.c[k].matrix() + &d.dot(th);
        residual_pi.push(op_norm(&(&pi - &ph.dot(&cl)).dot(xk)));
        pi_hat.push(pi);
    }
    Ok(Reconstruction {
        start: k0,
        x,
        x_tilde,
        y_bar,
        y_tilde,
        p_hat,
        pi_hat,
        duality,
        p_error,
        hermitian_defect: herm,
        residual_gain,
        residual_pi,
    })
}
