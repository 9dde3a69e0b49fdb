use serde::{Deserialize, Serialize};

use super::{cost, cost_of_path, ProblemSpec};
use crate::error::{QslqError, Result};
use crate::linalg::{adj_dot, c, dot, vec_norm, Vect};
use crate::qsde::{backward_impl, solve_forward, StatePath};
use crate::riccati::GainPath;

/// `max_k ||R_k u_k - B_k^* y_k - D_k^* Y_k||` for the adjoint pair of
/// `(x, u)`: source `-M x`, terminal `-G x_N`.
pub fn stationarity_residual(spec: &ProblemSpec, u: &[Vect], x: &StatePath) -> Result<f64> {
    let n = spec.steps();
    if u.len() != n || x.start != 0 || x.x.len() != n + 1 {
        return Err(QslqError::Dimension(
            "candidate pair does not cover the grid".into(),
        ));
    }
    let h: Vec<Vect> = (0..n)
        .map(|k| -spec.weights.m[k].matrix().dot(&x.x[k]))
        .collect();
    let xi = -spec.weights.g.matrix().dot(&x.x[n]);
    let adj = backward_impl(&xi, &h, &spec.coeffs, spec.grid.dt());
    let mut worst = 0.0f64;
    for k in 0..n {
        let r = spec.weights.r[k].dot(&u[k])
            - adj_dot(&spec.coeffs.b[k], &adj.y[k])
            - adj_dot(&spec.coeffs.d[k], &adj.big_y[k]);
        worst = worst.max(vec_norm(&r));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariationMode {
    /// `u^e = u + e (v - u)` for every `e` in the schedule.
    Convex { epsilons: Vec<f64> },
    /// `u^e = v` on every grid-aligned window of `width` steps, `u` elsewhere.
    Spike { widths: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationReport {
    /// `(J(u^e) - J(u)) / e` per trial and perturbation, in evaluation order.
    pub quotients: Vec<f64>,
    pub worst: f64,
}

pub fn variation_checks(
    spec: &ProblemSpec,
    ubar: &[Vect],
    mode: &VariationMode,
    trials: &[Vec<Vect>],
) -> Result<VariationReport> {
    let n = spec.steps();
    let base = cost(spec, ubar)?.total;
    let mut quotients = Vec::new();
    for v in trials {
        if v.len() != n {
            return Err(QslqError::Dimension(
                "trial control does not cover the grid".into(),
            ));
        }
        match mode {
            VariationMode::Convex { epsilons } => {
                for &e in epsilons {
                    if !(e > 0.0 && e <= 1.0) {
                        return Err(QslqError::Invalid(format!(
                            "convex step {e} outside (0, 1]"
                        )));
                    }
                    let ue: Vec<Vect> = ubar
                        .iter()
                        .zip(v)
                        .map(|(a, b)| a + &((b - a) * c(e)))
                        .collect();
                    quotients.push((cost(spec, &ue)?.total - base) / e);
                }
            }
            VariationMode::Spike { widths } => {
                for &w in widths {
                    if w == 0 || w > n {
                        return Err(QslqError::Invalid(format!(
                            "window width {w} outside 1..={n}"
                        )));
                    }
                    let eps = w as f64 * spec.grid.dt();
                    for tau in 0..=(n - w) {
                        let mut ue = ubar.to_vec();
                        ue[tau..tau + w].clone_from_slice(&v[tau..tau + w]);
                        quotients.push((cost(spec, &ue)?.total - base) / eps);
                    }
                }
            }
        }
    }
    let worst = quotients.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(VariationReport { quotients, worst })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompletionReport {
    /// `J(u) - J(Theta x)`.
    pub gap: f64,
    /// `1/2 Re sum dt <K_k (u_k - Theta_k x_k), u_k - Theta_k x_k>`.
    pub penalty: f64,
    pub residual: f64,
    /// `sum dt ||u_k - Theta_k x_k||^2`.
    pub deviation: f64,
}

/// Compares the cost excess of `u` over the feedback cost with the
/// `K`-weighted deviation of `u` from the feedback law along its own state.
pub fn completion_of_squares(
    spec: &ProblemSpec,
    gains: &GainPath,
    closed_loop_cost: f64,
    u: &[Vect],
) -> Result<CompletionReport> {
    let x = solve_forward(&spec.eta, u, &spec.coeffs, &spec.grid)?;
    let j = cost_of_path(spec, &x, u).total;
    let dt = spec.grid.dt();
    let mut penalty = 0.0;
    let mut deviation = 0.0;
    for k in 0..spec.steps() {
        let dev = &u[k] - &gains.theta[k].dot(x.node(k));
        penalty += 0.5 * dt * dot(&dev, &gains.k[k].dot(&dev)).re;
        deviation += dt * vec_norm(&dev).powi(2);
    }
    let gap = j - closed_loop_cost;
    Ok(CompletionReport {
        gap,
        penalty,
        residual: (gap - penalty).abs(),
        deviation,
    })
}
