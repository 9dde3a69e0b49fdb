//! Resolution ladders on the scalar family and observed orders.

use rayon::prelude::*;
use serde::Serialize;

use super::family::{
    check_budget, reduced_lyapunov_path, reduced_riccati_path, reduction_defect, ScalarFamily,
};
use crate::error::{QslqError, Result};
use crate::linalg::{c, loglog_slope, Vect, C64};
use crate::lq::{
    completion_of_squares, flow_reconstruct_p, open_loop_qp, stationarity_residual,
    synthesize_and_simulate, value, ProblemSpec,
};
use crate::qsde::solve_forward;
use crate::riccati::{
    integrate_riccati, lyapunov_adjoint, weak_solution_residual, InversionPolicy, WeakProbes,
};

/// Errors below this are treated as exact when fitting orders.
pub const EXACT_FLOOR: f64 = 1e-13;

/// Everything measured on one rung of the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LadderPoint {
    pub modes: usize,
    pub dt: f64,
    /// `|J_closed - 1/2 Re <P_0 eta, eta>|`.
    pub value: f64,
    /// `|V - V_continuum|`.
    pub value_continuum: f64,
    /// `J_closed - J_QP`.
    pub qp_gap: f64,
    pub completion: f64,
    pub stationarity: f64,
    pub duality: f64,
    pub p_error: f64,
    pub hermitian: f64,
    pub gain_residual: f64,
    pub pi_residual: f64,
    pub weak: f64,
    /// Operator path against the scalar reduction on the same RK4 subgrid.
    pub riccati_reduction: f64,
    pub lyapunov_reduction: f64,
    /// Operator path against the finely integrated scalar reduction.
    pub riccati_continuum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderRow {
    pub quantity: String,
    pub modes: Vec<usize>,
    /// Step lengths the errors were measured at (noise steps, or RK4 substeps
    /// for the integrator row).
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares log-log slope; infinite when every error is below
    /// [`EXACT_FLOOR`].
    pub order: f64,
}

impl OrderRow {
    fn new(quantity: &str, modes: Vec<usize>, steps: Vec<f64>, errors: Vec<f64>) -> Self {
        let order = if errors.iter().all(|e| *e <= EXACT_FLOOR) {
            f64::INFINITY
        } else {
            loglog_slope(&steps, &errors)
        };
        Self {
            quantity: quantity.to_string(),
            modes,
            steps,
            errors,
            order,
        }
    }

    pub fn finest(&self) -> f64 {
        self.errors.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderTable {
    pub points: Vec<LadderPoint>,
    pub rows: Vec<OrderRow>,
}

impl OrderTable {
    pub fn row(&self, quantity: &str) -> Option<&OrderRow> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }
}

/// Even mode counts from `start` to `start * 2^halvings`. Every rung has a
/// node at the midpoint of the horizon, so node-wise errors can be compared
/// at common times.
pub fn ladder(start: usize, halvings: usize) -> Result<Vec<usize>> {
    if start < 2 || !start.is_multiple_of(2) {
        return Err(QslqError::Invalid(format!(
            "ladder start {start} must be even and at least 2"
        )));
    }
    if halvings == 0 {
        return Err(QslqError::Invalid("at least one halving is needed".into()));
    }
    let end = start.checked_shl(halvings as u32).unwrap_or(usize::MAX);
    check_budget(end)?;
    Ok((start..=end).step_by(2).collect())
}

/// Runs the family on every rung and fits orders. The memory budget is
/// checked for the finest rung before anything is allocated.
pub fn convergence_study(
    family: &ScalarFamily,
    start: usize,
    halvings: usize,
    substeps: usize,
    policy: InversionPolicy,
) -> Result<OrderTable> {
    let modes = ladder(start, halvings)?;
    let points: Vec<LadderPoint> = modes
        .par_iter()
        .map(|&n| family_point(family, n, substeps, policy))
        .collect::<Result<_>>()?;
    let dts: Vec<f64> = points.iter().map(|p| p.dt).collect();
    let pick = |name: &str, f: fn(&LadderPoint) -> f64| {
        OrderRow::new(
            name,
            modes.clone(),
            dts.clone(),
            points.iter().map(f).collect(),
        )
    };
    let mut rows = vec![
        pick("value", |p| p.value),
        pick("value_continuum", |p| p.value_continuum),
        pick("qp_gap", |p| p.qp_gap),
        pick("completion", |p| p.completion),
        pick("stationarity", |p| p.stationarity),
        pick("duality", |p| p.duality),
        pick("p_error", |p| p.p_error),
        pick("hermitian", |p| p.hermitian),
        pick("gain_residual", |p| p.gain_residual),
        pick("pi_residual", |p| p.pi_residual),
        pick("weak", |p| p.weak),
    ];
    rows.push(substep_row(family, start, &[1, 2, 4, 8], policy)?);
    Ok(OrderTable { points, rows })
}

/// RK4 refinement at fixed `modes` against the finely integrated reduction.
pub fn substep_row(
    family: &ScalarFamily,
    modes: usize,
    substeps: &[usize],
    policy: InversionPolicy,
) -> Result<OrderRow> {
    let spec = family.problem(modes)?;
    let reference = reduced_riccati_path(family, modes, None);
    let errors = substeps
        .iter()
        .map(|&s| {
            let (path, _) = integrate_riccati(&spec.coeffs, &spec.weights, &spec.grid, s, policy)?;
            Ok(reduction_defect(&path.p, &reference))
        })
        .collect::<Result<Vec<f64>>>()?;
    let h = substeps
        .iter()
        .map(|&s| spec.grid.dt() / s as f64)
        .collect();
    Ok(OrderRow::new(
        "rk4_substeps",
        vec![modes; substeps.len()],
        h,
        errors,
    ))
}

/// Smooth deterministic control `u(t) = (cos(pi t) + i/2) e_0`.
pub fn smooth_control(spec: &ProblemSpec) -> Vec<Vect> {
    let m = spec.control_dim();
    (0..spec.steps())
        .map(|k| {
            let t = spec.grid.time(k);
            let mut u = Vect::zeros(m);
            u[0] = C64::new((std::f64::consts::PI * t).cos(), 0.5);
            u
        })
        .collect()
}

/// Probes built from the Brownian motion and smooth time functions, so that
/// they describe the same processes at every resolution.
pub fn smooth_probes(spec: &ProblemSpec, t: usize) -> Result<WeakProbes> {
    let space = spec.grid.space()?;
    let one = space.one().into_coeffs();
    let w = |k: usize| space.brownian(k).map(|e| e.into_coeffs());
    let wt = w(t)?;
    let mut probes = WeakProbes {
        xi1: &one + &(&wt * c(0.5)),
        xi2: &one * c(0.7) - &wt * c(0.3),
        mu1: Vec::new(),
        mu2: Vec::new(),
        nu1: Vec::new(),
        nu2: Vec::new(),
    };
    for k in t..spec.steps() {
        let s = spec.grid.time(k);
        let wk = w(k)?;
        probes.mu1.push(&one * c(s.cos()));
        probes.mu2.push(&wk * c(0.5));
        probes.nu1.push(&wk * c(0.4));
        probes.nu2.push(&one * C64::new(s.sin(), 0.2));
    }
    Ok(probes)
}

fn at_common(values: &[f64], first: usize, n: usize, nodes: bool) -> f64 {
    // Nodes (or left step nodes) at t0, the midpoint and T.
    let candidates = if nodes {
        vec![0, n / 2, n]
    } else {
        vec![0, n / 2]
    };
    candidates
        .into_iter()
        .filter(|&k| k >= first && k - first < values.len())
        .map(|k| values[k - first])
        .fold(0.0, f64::max)
}

pub fn family_point(
    family: &ScalarFamily,
    n: usize,
    substeps: usize,
    policy: InversionPolicy,
) -> Result<LadderPoint> {
    let spec = family.problem(n)?;
    let (path, gains) =
        integrate_riccati(&spec.coeffs, &spec.weights, &spec.grid, substeps, policy)?;
    let v = value(&path, &spec.eta);
    let run = synthesize_and_simulate(&spec, &gains)?;
    let qp = open_loop_qp(&spec)?;
    let x_qp = solve_forward(&spec.eta, &qp.u, &spec.coeffs, &spec.grid)?;
    let stationarity = stationarity_residual(&spec, &qp.u, &x_qp)?;
    let completion = completion_of_squares(&spec, &gains, run.cost.total, &smooth_control(&spec))?;

    let mut duality = 0.0f64;
    let mut p_error = 0.0f64;
    let mut hermitian = 0.0f64;
    let mut gain_residual = 0.0f64;
    let mut pi_residual = 0.0f64;
    let mut weak = 0.0f64;
    for k0 in [0, n / 2] {
        let r = flow_reconstruct_p(&spec, &path, &gains, k0)?;
        duality = duality.max(at_common(&r.duality, k0, n, true));
        p_error = p_error.max(at_common(&r.p_error, k0, n, true));
        hermitian = hermitian.max(at_common(&r.hermitian_defect, k0, n, true));
        gain_residual = gain_residual.max(at_common(&r.residual_gain, k0, n, false));
        pi_residual = pi_residual.max(at_common(&r.residual_pi, k0, n, false));
        let probes = smooth_probes(&spec, k0)?;
        weak = weak.max(weak_solution_residual(
            &path,
            &probes,
            &spec.coeffs,
            &spec.weights,
            &spec.grid,
            k0,
            policy,
        )?);
    }

    let reduced = reduced_riccati_path(family, n, Some(substeps));
    let phi = lyapunov_adjoint(&spec.coeffs, &spec.weights, &spec.grid, substeps)?;
    let phi_ref: Vec<Vec<f64>> = reduced_lyapunov_path(family, n, Some(substeps))
        .into_iter()
        .map(|x| vec![x; n + 1])
        .collect();
    let continuum = reduced_riccati_path(family, n, None);
    Ok(LadderPoint {
        modes: n,
        dt: spec.grid.dt(),
        value: (run.cost.total - v).abs(),
        value_continuum: (v - family.value()).abs(),
        qp_gap: run.cost.total - qp.j,
        completion: completion.residual,
        stationarity,
        duality,
        p_error,
        hermitian,
        gain_residual,
        pi_residual,
        weak,
        riccati_reduction: reduction_defect(&path.p, &reduced),
        lyapunov_reduction: reduction_defect(&phi.phi, &phi_ref),
        riccati_continuum: reduction_defect(&path.p, &continuum),
    })
}
