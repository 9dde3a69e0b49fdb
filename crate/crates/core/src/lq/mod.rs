//! Problem assembly, cost, feedback synthesis, the open-loop QP oracle,
//! Pontryagin checks and the flow reconstruction of `P`.

mod pontryagin;
mod qp;
mod reconstruct;

pub use pontryagin::{
    completion_of_squares, stationarity_residual, variation_checks, CompletionReport,
    VariationMode, VariationReport,
};
pub use qp::{open_loop_qp, OpenLoopSolution, QuadraticCost};
pub use reconstruct::{flow_reconstruct_p, Reconstruction};

use serde::Serialize;

use crate::clifford::CliffordElement;
use crate::error::{QslqError, Result};
use crate::linalg::{c, dot, Mat, Vect, ZERO};
use crate::qsde::{solve_forward, CoefficientPath, ControlPath, StatePath, TimeGrid};
use crate::riccati::{GainPath, RiccatiPath, Weights};

/// A full LQ instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub grid: TimeGrid,
    pub coeffs: CoefficientPath,
    pub weights: Weights,
    pub eta: CliffordElement,
    pub seed: Option<u64>,
    pub provenance: String,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        self.coeffs.validate(&self.grid)?;
        self.weights.validate(&self.grid, self.coeffs.control_dim)?;
        if self.eta.space().dim() != 1 << self.grid.steps() {
            return Err(QslqError::Dimension(
                "initial state lives in another space".into(),
            ));
        }
        crate::clifford::check_adapted(self.eta.coeffs(), 0)
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn control_dim(&self) -> usize {
        self.coeffs.control_dim
    }

    pub fn dim(&self) -> usize {
        1 << self.grid.steps()
    }

    pub fn zero_controls(&self) -> ControlPath {
        vec![Vect::zeros(self.control_dim()); self.steps()]
    }

    /// Same problem with initial state `eta`.
    pub fn with_eta(&self, eta: CliffordElement) -> Self {
        let mut out = self.clone();
        out.eta = eta;
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub running_state: f64,
    pub running_control: f64,
    pub terminal: f64,
    pub total: f64,
    /// Largest imaginary part among the raw pairings.
    pub imaginary: f64,
}

/// Cost of a state path driven by `u`.
pub fn cost_of_path(spec: &ProblemSpec, x: &StatePath, u: &[Vect]) -> CostBreakdown {
    let dt = spec.grid.dt();
    let mut state = ZERO;
    let mut control = ZERO;
    let mut imag = 0.0f64;
    for k in 0..spec.steps() {
        let xs = dot(x.node(k), &spec.weights.m[k].matrix().dot(x.node(k)));
        let us = dot(&u[k], &spec.weights.r[k].dot(&u[k]));
        imag = imag.max(xs.im.abs()).max(us.im.abs());
        state += xs * c(dt);
        control += us * c(dt);
    }
    let n = spec.steps();
    let term = dot(x.node(n), &spec.weights.g.matrix().dot(x.node(n)));
    imag = imag.max(term.im.abs());
    CostBreakdown {
        running_state: 0.5 * state.re,
        running_control: 0.5 * control.re,
        terminal: 0.5 * term.re,
        total: 0.5 * (state + control + term).re,
        imaginary: imag,
    }
}

/// `J(u)` by forward simulation.
pub fn cost(spec: &ProblemSpec, u: &[Vect]) -> Result<CostBreakdown> {
    let x = solve_forward(&spec.eta, u, &spec.coeffs, &spec.grid)?;
    Ok(cost_of_path(spec, &x, u))
}

/// `1/2 Re <P(t_0) eta, eta>`.
pub fn value(path: &RiccatiPath, eta: &CliffordElement) -> f64 {
    0.5 * dot(eta.coeffs(), &path.p[0].dot(eta.coeffs())).re
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRun {
    pub theta: Vec<Mat>,
    pub state: StatePath,
    pub controls: ControlPath,
    pub cost: CostBreakdown,
}

/// Runs `u_k = Theta_k x_k` forward and evaluates the cost.
pub fn synthesize_and_simulate(spec: &ProblemSpec, gains: &GainPath) -> Result<ClosedLoopRun> {
    spec.validate()?;
    let n = spec.steps();
    if gains.theta.len() != n {
        return Err(QslqError::Dimension(
            "gain path does not cover the grid".into(),
        ));
    }
    let dt = spec.grid.dt();
    let mut x = vec![spec.eta.coeffs().clone()];
    let mut controls = Vec::with_capacity(n);
    let mut worst = 0.0f64;
    for k in 0..n {
        let u = gains.theta[k].dot(&x[k]);
        let (next, defect) = crate::qsde::forward_step(&x[k], k, Some(&u), &spec.coeffs, dt, true);
        worst = worst.max(defect);
        controls.push(u);
        x.push(next);
    }
    let state = StatePath {
        space: spec.grid.space()?,
        start: 0,
        x,
        isometry_defect: worst,
    };
    let cost = cost_of_path(spec, &state, &controls);
    Ok(ClosedLoopRun {
        theta: gains.theta.clone(),
        state,
        controls,
        cost,
    })
}
