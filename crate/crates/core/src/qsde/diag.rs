//! Scheme diagnostics: the discrete Itô pairing defect and Galerkin
//! truncation curves.

use serde::Serialize;

use super::{
    flow_backward, flow_forward, flow_inverse_adjoint, BackwardSolution, CoefficientPath, Flow,
    StatePath, TimeGrid,
};
use crate::clifford::SuperOperator;
use crate::error::{QslqError, Result};
use crate::linalg::{adj_dot, c, dot, op_norm, vec_norm, Mat, Vect, ZERO};

/// `| <y_N, x_N> - <y_0, x_0> - sum_k dt * drift_k |`, where `drift_k` is the
/// Itô drift of `<y, x>` written with the coefficients:
/// `<y, Ax + Bu + f> - <A^*y + C^*Y + h, x> + <Y, Cx + Du + g>`.
/// Empty `u` or `h` mean zero.
pub fn ito_pairing_residual(
    y: &BackwardSolution,
    x: &StatePath,
    u: &[Vect],
    h: &[Vect],
    coeffs: &CoefficientPath,
    grid: &TimeGrid,
) -> Result<f64> {
    let n = grid.steps();
    if x.start != 0 || x.x.len() != n + 1 || y.y.len() != n + 1 || y.big_y.len() != n {
        return Err(QslqError::Dimension("paths do not cover the grid".into()));
    }
    if (!u.is_empty() && u.len() != n) || (!h.is_empty() && h.len() != n) {
        return Err(QslqError::Dimension(
            "input paths do not cover the grid".into(),
        ));
    }
    let dt = grid.dt();
    let mut sum = ZERO;
    for k in 0..n {
        let xk = &x.x[k];
        let yk = &y.y[k];
        let big = &y.big_y[k];
        let mut drift = coeffs.a[k].matrix().dot(xk);
        let mut diff = coeffs.c[k].matrix().dot(xk);
        if let Some(uk) = u.get(k) {
            drift += &coeffs.b[k].dot(uk);
            diff += &coeffs.d[k].dot(uk);
        }
        if let Some(f) = &coeffs.f {
            drift += &f[k];
        }
        if let Some(g) = &coeffs.g {
            diff += &g[k];
        }
        let mut back = adj_dot(coeffs.a[k].matrix(), yk) + adj_dot(coeffs.c[k].matrix(), big);
        if let Some(hk) = h.get(k) {
            back += hk;
        }
        sum += (dot(yk, &drift) - dot(&back, xk) + dot(big, &diff)) * dt;
    }
    let lhs = dot(&y.y[n], &x.x[n]) - dot(&y.y[0], &x.x[0]);
    Ok((lhs - sum).norm())
}

/// Error curve over truncation levels `1..=2^N`; entry `l - 1` is level `l`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GalerkinCurve {
    pub component: String,
    pub errors: Vec<f64>,
}

impl GalerkinCurve {
    /// Largest increase between consecutive levels (0 for a monotone curve).
    pub fn max_increase(&self) -> f64 {
        self.errors
            .windows(2)
            .map(|w| (w[1] - w[0]).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn final_error(&self) -> f64 {
        self.errors.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinReport {
    pub start: usize,
    /// Worst case over unit data: `max_k ||F_k (I - Gamma_l)||` for each flow
    /// `F` in `x, y, Y, x~`.
    pub operator_curves: Vec<GalerkinCurve>,
    /// Same errors for the single datum `varsigma`.
    pub datum_curves: Vec<GalerkinCurve>,
    /// Truncated solution at the requested level, re-solved from scratch.
    pub level: usize,
    pub truncated_state: Vec<Vect>,
    pub truncated_adjoint: BackwardSolution,
    pub truncated_dual: Vec<Vect>,
}

/// Galerkin truncation of the closed-loop system started at node `k0`.
///
/// Data `varsigma` in `H_{k0}` is replaced by its projection onto the first
/// `level` basis vectors and the forward-backward system plus the `x~`
/// equation are re-solved; the curves sweep every level.
#[allow(clippy::too_many_arguments)]
pub fn galerkin_truncate(
    theta: &[Mat],
    coeffs: &CoefficientPath,
    m_weights: &[SuperOperator],
    g_weight: &SuperOperator,
    grid: &TimeGrid,
    k0: usize,
    varsigma: &Vect,
    level: usize,
) -> Result<GalerkinReport> {
    let n = grid.steps();
    let dim = 1usize << n;
    if level == 0 || level > dim {
        return Err(QslqError::Invalid(format!(
            "truncation level {level} outside 1..={dim}"
        )));
    }
    if varsigma.len() != dim {
        return Err(QslqError::Dimension("datum has the wrong length".into()));
    }
    crate::clifford::check_adapted(varsigma, k0)?;
    let x = flow_forward(Some(theta), coeffs, grid, k0)?;
    let xt = flow_inverse_adjoint(Some(theta), coeffs, grid, k0)?;
    let (yb, yt) = flow_backward(&x, coeffs, m_weights, g_weight, grid)?;
    let width = x.width();
    let flows: [(&str, &Flow); 4] = [("x", &x), ("y", &yb), ("Y", &yt), ("x_tilde", &xt)];

    let operator_curves = flows
        .iter()
        .map(|(name, f)| GalerkinCurve {
            component: name.to_string(),
            errors: (1..=dim)
                .map(|l| {
                    if l >= width {
                        return 0.0;
                    }
                    f.nodes
                        .iter()
                        .map(|m| op_norm(&m.slice(ndarray::s![.., l..]).to_owned()))
                        .fold(0.0, f64::max)
                })
                .collect(),
        })
        .collect();

    let datum = varsigma.slice(ndarray::s![..width]).to_owned();
    let datum_curves = flows
        .iter()
        .map(|(name, f)| GalerkinCurve {
            component: name.to_string(),
            errors: (1..=dim)
                .map(|l| {
                    if l >= width {
                        return 0.0;
                    }
                    let mut tail = datum.clone();
                    tail.slice_mut(ndarray::s![..l]).fill(ZERO);
                    f.nodes
                        .iter()
                        .map(|m| vec_norm(&m.dot(&tail)))
                        .fold(0.0, f64::max)
                })
                .collect(),
        })
        .collect();

    // Re-solve at the requested level.
    let mut trunc = varsigma.clone();
    trunc.slice_mut(ndarray::s![level.min(dim)..]).fill(ZERO);
    let dt = grid.dt();
    let mut state = vec![trunc.clone()];
    for k in k0..n {
        let u = theta[k].dot(&state[k - k0]);
        let (next, _) = super::forward_step(&state[k - k0], k, Some(&u), coeffs, dt, false);
        state.push(next);
    }
    let mut y = vec![Vect::zeros(0); n - k0 + 1];
    let mut big_y = vec![Vect::zeros(0); n - k0];
    y[n - k0] = -g_weight.matrix().dot(&state[n - k0]);
    for k in (k0..n).rev() {
        let h = -m_weights[k].matrix().dot(&state[k - k0]);
        let (yk, yy) = super::backward_step(&y[k + 1 - k0], k, Some(&h), coeffs, dt);
        y[k - k0] = yk;
        big_y[k - k0] = yy;
    }
    let mut dual = vec![trunc];
    for k in k0..n {
        let prev = Mat::from_shape_vec((dim, 1), dual[k - k0].to_vec()).expect("column shape");
        let single = Flow {
            start: k,
            nodes: vec![prev],
        };
        dual.push(dual_step(&single, theta, coeffs, grid, k));
    }
    Ok(GalerkinReport {
        start: k0,
        operator_curves,
        datum_curves,
        level,
        truncated_state: state,
        truncated_adjoint: BackwardSolution { y, big_y },
        truncated_dual: dual,
    })
}

/// One `x~` step for a single column.
fn dual_step(
    col: &Flow,
    theta: &[Mat],
    coeffs: &CoefficientPath,
    grid: &TimeGrid,
    k: usize,
) -> Vect {
    let dt = grid.dt();
    let x = &col.nodes[0];
    let cadj = |v: &Mat| {
        crate::linalg::adj_dot_mat(coeffs.c[k].matrix(), v)
            + crate::linalg::adj_dot_mat(&theta[k], &crate::linalg::adj_dot_mat(&coeffs.d[k], v))
    };
    let aadj = crate::linalg::adj_dot_mat(coeffs.a[k].matrix(), x)
        + crate::linalg::adj_dot_mat(&theta[k], &crate::linalg::adj_dot_mat(&coeffs.b[k], x));
    let cx = cadj(x);
    let drift = cadj(&cx) - aadj;
    let next = x + &(drift * c(dt)) - crate::clifford::right_mul_generator_mat(&cx, k + 1, dt);
    next.column(0).to_owned()
}
