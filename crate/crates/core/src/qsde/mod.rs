//! Euler–Itô solvers for forward, backward and coupled QSDEs on the discrete
//! Clifford space.
//!
//! Step `k` runs from node `k` to node `k + 1` and is driven by the increment
//! `gamma_{k+1}`. Coefficients are constant on each step.

mod diag;
mod flow;

pub use diag::{galerkin_truncate, ito_pairing_residual, GalerkinCurve, GalerkinReport};
pub use flow::{flow_backward, flow_forward, flow_forward_parity_form, flow_inverse_adjoint, Flow};

use serde::{Deserialize, Serialize};

use crate::clifford::{
    check_adapted, increment_kernel, mass_outside, right_mul_generator, truncate, CliffordElement,
    CliffordSpace, SuperOperator, ADAPTED_TOL,
};
use crate::error::{QslqError, Result};
use crate::linalg::{adj_dot, fro_norm, vec_norm, Mat, Vect};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    t_end: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(QslqError::Invalid(
                "time grid needs at least one step".into(),
            ));
        }
        if !t0.is_finite() || !t_end.is_finite() || t_end <= t0 {
            return Err(QslqError::Invalid(format!("empty horizon [{t0}, {t_end}]")));
        }
        Ok(Self { t0, t_end, steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t0) / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt()
    }

    pub fn space(&self) -> Result<CliffordSpace> {
        CliffordSpace::new(self.steps, self.dt())
    }
}

/// Per-step coefficients of `dx = (Ax + Bu + f)dt + (Cx + Du + g)dW`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPath {
    pub a: Vec<SuperOperator>,
    pub b: Vec<Mat>,
    pub c: Vec<SuperOperator>,
    pub d: Vec<Mat>,
    pub f: Option<Vec<Vect>>,
    pub g: Option<Vec<Vect>>,
    pub control_dim: usize,
    /// Require `range(A_k), range(C_k)` inside `H_k`.
    pub strict: bool,
}

fn block_mass(m: &Mat, rows_from: usize, cols_to: usize) -> f64 {
    m.slice(ndarray::s![rows_from.., ..cols_to])
        .iter()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

impl CoefficientPath {
    /// All-zero coefficients with control dimension `m`.
    pub fn zero(grid: &TimeGrid, m: usize) -> Self {
        let dim = 1usize << grid.steps();
        let n = grid.steps();
        Self {
            a: vec![SuperOperator::zero(dim); n],
            b: vec![Mat::zeros((dim, m)); n],
            c: vec![SuperOperator::zero(dim); n],
            d: vec![Mat::zeros((dim, m)); n],
            f: None,
            g: None,
            control_dim: m,
            strict: false,
        }
    }

    pub fn steps(&self) -> usize {
        self.a.len()
    }

    /// Shapes plus filtration compatibility at every step.
    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        let n = grid.steps();
        let dim = 1usize << n;
        let m = self.control_dim;
        let lens = [self.a.len(), self.b.len(), self.c.len(), self.d.len()];
        if lens.iter().any(|&l| l != n) {
            return Err(QslqError::Dimension(format!(
                "coefficient paths have lengths {lens:?}, grid has {n} steps"
            )));
        }
        for (name, src) in [("f", &self.f), ("g", &self.g)] {
            if let Some(v) = src {
                if v.len() != n || v.iter().any(|e| e.len() != dim) {
                    return Err(QslqError::Dimension(format!(
                        "source {name} has wrong shape"
                    )));
                }
            }
        }
        for k in 0..n {
            let lo = 1usize << k;
            for op in [&self.a[k], &self.c[k]] {
                if op.dim() != dim {
                    return Err(QslqError::Dimension(format!(
                        "step {k}: operator size {} but space has {dim}",
                        op.dim()
                    )));
                }
                let mat = op.matrix();
                let scale = ADAPTED_TOL * fro_norm(mat);
                let leak = if self.strict {
                    block_mass(mat, lo, dim)
                } else {
                    block_mass(mat, lo, lo)
                };
                if leak > scale {
                    return Err(QslqError::NotAdapted {
                        step: k,
                        mass: leak,
                    });
                }
            }
            for map in [&self.b[k], &self.d[k]] {
                if map.dim() != (dim, m) {
                    return Err(QslqError::Dimension(format!(
                        "step {k}: control map is {:?}, expected ({dim}, {m})",
                        map.dim()
                    )));
                }
                let leak = block_mass(map, lo, m);
                if leak > ADAPTED_TOL * fro_norm(map) {
                    return Err(QslqError::NotAdapted {
                        step: k,
                        mass: leak,
                    });
                }
            }
            for src in [&self.f, &self.g].into_iter().flatten() {
                check_adapted(&src[k], k)?;
            }
        }
        Ok(())
    }

    /// `(A_k + B_k Theta_k, C_k + D_k Theta_k)`.
    pub fn closed_loop(&self, k: usize, theta: &Mat) -> (Mat, Mat) {
        (
            self.a[k].matrix() + &self.b[k].dot(theta),
            self.c[k].matrix() + &self.d[k].dot(theta),
        )
    }
}

/// Deterministic control path: one `U = C^m` vector per step.
pub type ControlPath = Vec<Vect>;

#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    pub space: CliffordSpace,
    /// Node of the first stored state.
    pub start: usize,
    pub x: Vec<Vect>,
    /// Largest `| ||z gamma||^2 - dt ||z||^2 |` over the diffusion terms.
    pub isometry_defect: f64,
}

impl StatePath {
    pub fn node(&self, k: usize) -> &Vect {
        &self.x[k - self.start]
    }

    pub fn element(&self, k: usize) -> CliffordElement {
        self.space
            .element(self.node(k).clone())
            .expect("state path stores full-length vectors")
    }

    pub fn last(&self) -> &Vect {
        self.x.last().expect("state path is never empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardSolution {
    /// `y_0 .. y_N`.
    pub y: Vec<Vect>,
    /// `Y_0 .. Y_{N-1}`.
    pub big_y: Vec<Vect>,
}

fn check_controls(u: &[Vect], steps: usize, m: usize) -> Result<()> {
    if u.len() != steps || u.iter().any(|v| v.len() != m) {
        return Err(QslqError::Dimension(format!(
            "control path must be {steps} vectors of length {m}"
        )));
    }
    Ok(())
}

/// One Euler–Itô step from node `k`; returns `x_{k+1}` and the diffusion
/// isometry defect.
pub(crate) fn forward_step(
    x: &Vect,
    k: usize,
    u: Option<&Vect>,
    coeffs: &CoefficientPath,
    dt: f64,
    sources: bool,
) -> (Vect, f64) {
    let mut drift = coeffs.a[k].matrix().dot(x);
    let mut diffusion = coeffs.c[k].matrix().dot(x);
    if let Some(u) = u {
        drift += &coeffs.b[k].dot(u);
        diffusion += &coeffs.d[k].dot(u);
    }
    if sources {
        if let Some(f) = &coeffs.f {
            drift += &f[k];
        }
        if let Some(g) = &coeffs.g {
            diffusion += &g[k];
        }
    }
    let noise = right_mul_generator(&diffusion, k + 1, dt);
    let defect = (vec_norm(&noise).powi(2) - dt * vec_norm(&diffusion).powi(2)).abs();
    (x + &(drift * crate::linalg::c(dt)) + noise, defect)
}

fn forward_impl(
    k0: usize,
    eta: &Vect,
    u: &[Vect],
    coeffs: &CoefficientPath,
    grid: &TimeGrid,
    sources: bool,
) -> Result<StatePath> {
    let space = grid.space()?;
    space.check_index(k0)?;
    if eta.len() != space.dim() {
        return Err(QslqError::Dimension(format!(
            "initial state has {} coefficients, space has {}",
            eta.len(),
            space.dim()
        )));
    }
    let n = grid.steps();
    check_controls(u, n - k0, coeffs.control_dim)?;
    check_adapted(eta, k0)?;
    let dt = grid.dt();
    let mut x = Vec::with_capacity(n - k0 + 1);
    x.push(eta.clone());
    let mut worst = 0.0f64;
    for k in k0..n {
        let (next, defect) = forward_step(&x[k - k0], k, Some(&u[k - k0]), coeffs, dt, sources);
        worst = worst.max(defect);
        check_adapted(&next, k + 1)?;
        x.push(next);
    }
    Ok(StatePath {
        space,
        start: k0,
        x,
        isometry_defect: worst,
    })
}

/// Forward QSDE from node 0.
pub fn solve_forward(
    eta: &CliffordElement,
    u: &[Vect],
    coeffs: &CoefficientPath,
    grid: &TimeGrid,
) -> Result<StatePath> {
    coeffs.validate(grid)?;
    forward_impl(0, eta.coeffs(), u, coeffs, grid, true)
}

/// Forward QSDE started at node `k0` with `eta` in `H_{k0}`; `u` covers steps
/// `k0..N`.
pub fn solve_forward_from(
    k0: usize,
    eta: &CliffordElement,
    u: &[Vect],
    coeffs: &CoefficientPath,
    grid: &TimeGrid,
) -> Result<StatePath> {
    coeffs.validate(grid)?;
    forward_impl(k0, eta.coeffs(), u, coeffs, grid, true)
}

/// Forward solve that ignores the sources `f, g`; used for impulse responses.
pub(crate) fn solve_forward_homogeneous(
    eta: &Vect,
    u: &[Vect],
    coeffs: &CoefficientPath,
    grid: &TimeGrid,
) -> Result<StatePath> {
    forward_impl(0, eta, u, coeffs, grid, false)
}

/// One backward step: returns `(y_k, Y_k)` from `y_{k+1}`.
pub(crate) fn backward_step(
    y_next: &Vect,
    k: usize,
    h: Option<&Vect>,
    coeffs: &CoefficientPath,
    dt: f64,
) -> (Vect, Vect) {
    let big_y = increment_kernel(y_next, k, dt);
    let mut drift = adj_dot(coeffs.a[k].matrix(), y_next) + adj_dot(coeffs.c[k].matrix(), &big_y);
    if let Some(h) = h {
        drift += h;
    }
    let mut y = y_next + &(drift * crate::linalg::c(dt));
    truncate(&mut y, k);
    (y, big_y)
}

/// Backward QSDE `dy = -(A^* y + C^* Y + h)dt + Y dW`, `y_N = xi`. An empty
/// `h` means zero source.
pub fn solve_backward(
    xi: &CliffordElement,
    h: &[Vect],
    coeffs: &CoefficientPath,
    grid: &TimeGrid,
) -> Result<BackwardSolution> {
    coeffs.validate(grid)?;
    let n = grid.steps();
    let dim = xi.space().dim();
    if dim != 1 << n {
        return Err(QslqError::Dimension(
            "terminal value lives in another space".into(),
        ));
    }
    if !h.is_empty() {
        if h.len() != n || h.iter().any(|v| v.len() != dim) {
            return Err(QslqError::Dimension(format!(
                "source path must be {n} vectors of length {dim}"
            )));
        }
        for (k, hk) in h.iter().enumerate() {
            check_adapted(hk, k)?;
        }
    }
    Ok(backward_impl(xi.coeffs(), h, coeffs, grid.dt()))
}

pub(crate) fn backward_impl(
    xi: &Vect,
    h: &[Vect],
    coeffs: &CoefficientPath,
    dt: f64,
) -> BackwardSolution {
    let n = coeffs.steps();
    let mut y = vec![Vect::zeros(0); n + 1];
    let mut big_y = vec![Vect::zeros(0); n];
    y[n] = xi.clone();
    for k in (0..n).rev() {
        let (yk, yy) = backward_step(&y[k + 1], k, h.get(k), coeffs, dt);
        y[k] = yk;
        big_y[k] = yy;
    }
    BackwardSolution { y, big_y }
}

/// Output of [`solve_closed_loop`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub state: StatePath,
    pub controls: ControlPath,
    pub adjoint: BackwardSolution,
}

/// Forward run under `u_k = Theta_k x_k`, then the adjoint equation with
/// source `-M x` and terminal `-G x_N`.
pub fn solve_closed_loop(
    varsigma: &CliffordElement,
    theta: &[Mat],
    coeffs: &CoefficientPath,
    m_weights: &[SuperOperator],
    g_weight: &SuperOperator,
    grid: &TimeGrid,
) -> Result<ClosedLoop> {
    coeffs.validate(grid)?;
    let n = grid.steps();
    let dim = 1usize << n;
    if theta.len() != n || theta.iter().any(|t| t.dim() != (coeffs.control_dim, dim)) {
        return Err(QslqError::Dimension(format!(
            "feedback path must be {n} maps of shape ({}, {dim})",
            coeffs.control_dim
        )));
    }
    if m_weights.len() != n || g_weight.dim() != dim {
        return Err(QslqError::Dimension(
            "weight shapes do not match the grid".into(),
        ));
    }
    check_adapted(varsigma.coeffs(), 0)?;
    let dt = grid.dt();
    let mut x = vec![varsigma.coeffs().clone()];
    let mut controls = Vec::with_capacity(n);
    let mut worst = 0.0f64;
    for k in 0..n {
        let u = theta[k].dot(&x[k]);
        let (next, defect) = forward_step(&x[k], k, Some(&u), coeffs, dt, true);
        worst = worst.max(defect);
        check_adapted(&next, k + 1)?;
        controls.push(u);
        x.push(next);
    }
    let h: Vec<Vect> = (0..n).map(|k| -m_weights[k].matrix().dot(&x[k])).collect();
    let xi = -g_weight.matrix().dot(&x[n]);
    let adjoint = backward_impl(&xi, &h, coeffs, dt);
    Ok(ClosedLoop {
        state: StatePath {
            space: grid.space()?,
            start: 0,
            x,
            isometry_defect: worst,
        },
        controls,
        adjoint,
    })
}

/// Largest relative mass of a path outside its filtration level.
pub fn adaptedness_defect(path: &[Vect], start: usize) -> f64 {
    path.iter()
        .enumerate()
        .map(|(i, v)| {
            let n = vec_norm(v);
            if n == 0.0 {
                0.0
            } else {
                mass_outside(v, start + i) / n
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, C64};

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(0.0, 1.0, n).unwrap()
    }

    fn zero_u(n: usize, m: usize) -> Vec<Vect> {
        vec![Vect::zeros(m); n]
    }

    #[test]
    fn zero_coefficients_freeze_the_state() {
        let g = grid(3);
        let sp = g.space().unwrap();
        let co = CoefficientPath::zero(&g, 1);
        let eta = sp.scalar(C64::new(0.5, -1.0));
        let path = solve_forward(&eta, &zero_u(3, 1), &co, &g).unwrap();
        assert!(path.x.iter().all(|x| x == eta.coeffs()));
    }

    #[test]
    fn unit_noise_grows_by_one_plus_dt() {
        let n = 5;
        let g = grid(n);
        let sp = g.space().unwrap();
        let mut co = CoefficientPath::zero(&g, 1);
        co.c = vec![SuperOperator::identity(sp.dim()); n];
        let eta = sp.scalar(c(2.0));
        let path = solve_forward(&eta, &zero_u(n, 1), &co, &g).unwrap();
        let expect = 4.0 * (1.0 + g.dt()).powi(n as i32);
        assert!((vec_norm(path.last()).powi(2) - expect).abs() < 1e-12);
        assert!(path.isometry_defect < 1e-14);
    }

    #[test]
    fn brownian_terminal_has_unit_kernel() {
        let n = 4;
        let g = grid(n);
        let sp = g.space().unwrap();
        let co = CoefficientPath::zero(&g, 1);
        let sol = solve_backward(&sp.brownian(n).unwrap(), &[], &co, &g).unwrap();
        for k in 0..=n {
            assert!(vec_norm(&(&sol.y[k] - sp.brownian(k).unwrap().coeffs())) < 1e-14);
        }
        for k in 0..n {
            assert!(vec_norm(&(&sol.big_y[k] - sp.one().coeffs())) < 1e-14);
        }
    }

    #[test]
    fn incompatible_drift_rejected() {
        let g = grid(2);
        let mut co = CoefficientPath::zero(&g, 1);
        let mut leak = Mat::zeros((4, 4));
        leak[(1, 0)] = c(1.0);
        co.a[0] = SuperOperator::general(leak).unwrap();
        assert!(matches!(
            co.validate(&g),
            Err(QslqError::NotAdapted { step: 0, .. })
        ));
    }

    #[test]
    fn strict_mode_checks_full_range() {
        let g = grid(2);
        let mut co = CoefficientPath::zero(&g, 1);
        let mut m = Mat::zeros((4, 4));
        m[(3, 3)] = c(1.0);
        co.a[1] = SuperOperator::general(m).unwrap();
        assert!(co.validate(&g).is_ok());
        co.strict = true;
        assert!(co.validate(&g).is_err());
    }

    #[test]
    fn non_adapted_initial_state_rejected() {
        let g = grid(2);
        let sp = g.space().unwrap();
        let co = CoefficientPath::zero(&g, 1);
        let eta = sp.generator(1).unwrap();
        assert!(matches!(
            solve_forward(&eta, &zero_u(2, 1), &co, &g),
            Err(QslqError::NotAdapted { step: 0, .. })
        ));
        assert!(solve_forward_from(1, &eta, &zero_u(1, 1), &co, &g).is_ok());
    }

    #[test]
    fn zero_weights_give_zero_adjoint() {
        let n = 3;
        let g = grid(n);
        let sp = g.space().unwrap();
        let mut co = CoefficientPath::zero(&g, 1);
        co.c = vec![SuperOperator::identity(8); n];
        let theta = vec![Mat::from_elem((1, 8), c(0.3)); n];
        let mw = vec![SuperOperator::zero(8); n];
        let out =
            solve_closed_loop(&sp.one(), &theta, &co, &mw, &SuperOperator::zero(8), &g).unwrap();
        assert!(out.adjoint.y.iter().all(|v| vec_norm(v) == 0.0));
        assert!(out.adjoint.big_y.iter().all(|v| vec_norm(v) == 0.0));
    }
}
