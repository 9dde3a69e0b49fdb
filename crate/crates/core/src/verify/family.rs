//! Resolution-independent scalar family with full control on the past.
//!
//! `U = L^2` coordinates, `B_k = b E_k`, `D_k = d E_k` with `E_k` the
//! coordinate projection onto `H_k`, and `A, C, M, G, R` scalar multiples of
//! the identity. The operator Riccati solution then acts on the reachable
//! states as the classical scalar Riccati solution `p(t)`, which gives an
//! exact continuum reference for every resolution.

use serde::{Deserialize, Serialize};

use crate::clifford::SuperOperator;
use crate::error::{QslqError, Result};
use crate::linalg::{c, Mat, C64};
use crate::lq::ProblemSpec;
use crate::qsde::{CoefficientPath, TimeGrid};
use crate::riccati::Weights;

/// Largest mode count for which dense superoperators are allocated.
pub const MAX_DENSE_MODES: usize = 10;
/// Memory budget for one dense problem, in bytes.
pub const MEMORY_BUDGET: u128 = 4 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalarFamily {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub q: f64,
    pub r: f64,
    pub g: f64,
    pub t0: f64,
    pub t_end: f64,
    pub eta: f64,
}

impl Default for ScalarFamily {
    fn default() -> Self {
        Self {
            a: -0.3,
            b: 0.8,
            c: 0.5,
            d: 0.4,
            q: 0.5,
            r: 1.0,
            g: 1.0,
            t0: 0.0,
            t_end: 1.0,
            eta: 1.0,
        }
    }
}

/// Bytes held by one problem's coefficient paths at `modes`: roughly eight
/// dense `2^N x 2^N` complex matrices per step.
pub fn dense_bytes(modes: usize) -> u128 {
    let dim = 1u128 << modes.min(60);
    dim * dim * 16 * 8 * modes as u128
}

pub fn check_budget(modes: usize) -> Result<()> {
    let bytes = dense_bytes(modes);
    if modes > MAX_DENSE_MODES || bytes > MEMORY_BUDGET {
        return Err(QslqError::MemoryBudget {
            modes,
            bytes,
            budget: MEMORY_BUDGET,
        });
    }
    Ok(())
}

impl ScalarFamily {
    pub fn problem(&self, modes: usize) -> Result<ProblemSpec> {
        check_budget(modes)?;
        let grid = TimeGrid::new(self.t0, self.t_end, modes)?;
        let dim = 1usize << modes;
        let mut coeffs = CoefficientPath::zero(&grid, dim);
        for k in 0..modes {
            let lo = 1usize << k;
            let e = Mat::from_shape_fn((dim, dim), |(i, j)| {
                if i == j && i < lo {
                    c(1.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            coeffs.a[k] = SuperOperator::hermitian(Mat::eye(dim) * c(self.a))?;
            coeffs.c[k] = SuperOperator::hermitian(Mat::eye(dim) * c(self.c))?;
            coeffs.b[k] = &e * c(self.b);
            coeffs.d[k] = &e * c(self.d);
        }
        let weights = Weights {
            m: vec![SuperOperator::psd(Mat::eye(dim) * c(self.q))?; modes],
            r: vec![Mat::eye(dim) * c(self.r); modes],
            g: SuperOperator::psd(Mat::eye(dim) * c(self.g))?,
        };
        let eta = grid.space()?.scalar(c(self.eta));
        let spec = ProblemSpec {
            grid,
            coeffs,
            weights,
            eta,
            seed: None,
            provenance: format!("scalar family {self:?}"),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn riccati_rhs(&self, p: f64) -> f64 {
        let l = (self.b + self.d * self.c) * p;
        let k = self.r + self.d * self.d * p;
        -(2.0 * self.a * p + self.c * self.c * p + self.q - l * l / k)
    }

    fn lyapunov_rhs(&self, phi: f64) -> f64 {
        -(2.0 * self.a * phi + self.c * self.c * phi - self.q)
    }

    /// Classical scalar Riccati solution at `t`, by RK4 on a fine grid.
    pub fn riccati(&self, t: f64) -> f64 {
        scalar_back(self.g, self.t_end, t, |p| self.riccati_rhs(p))
    }

    /// Classical scalar Lyapunov solution with `phi(T) = -g`.
    pub fn lyapunov(&self, t: f64) -> f64 {
        scalar_back(-self.g, self.t_end, t, |p| self.lyapunov_rhs(p))
    }

    /// Continuum value `1/2 p(t0) |eta|^2`.
    pub fn value(&self) -> f64 {
        0.5 * self.riccati(self.t0) * self.eta * self.eta
    }
}

/// Scalar reduction of the operator Riccati path: entry `[grade]` of node `k`
/// is the diagonal value of `P_k` on monomials whose largest index is
/// `grade`. Those monomials are controlled on steps `k >= grade` and follow
/// the uncontrolled equation before. Integrated with the operator solver's
/// RK4 subgrid, or with a fine grid when `substeps` is `None`.
pub fn reduced_riccati_path(
    family: &ScalarFamily,
    modes: usize,
    substeps: Option<usize>,
) -> Vec<Vec<f64>> {
    let dt = (family.t_end - family.t0) / modes as f64;
    let free = |p: f64| -(2.0 * family.a * p + family.c * family.c * p + family.q);
    let mut out = vec![vec![0.0; modes + 1]; modes + 1];
    out[modes] = vec![family.g; modes + 1];
    for k in (0..modes).rev() {
        for grade in 0..=modes {
            let p = out[k + 1][grade];
            let t_hi = family.t0 + (k + 1) as f64 * dt;
            out[k][grade] = if grade <= k {
                step_back(p, t_hi, dt, substeps, |x| family.riccati_rhs(x))
            } else {
                step_back(p, t_hi, dt, substeps, free)
            };
        }
    }
    out
}

/// Scalar Lyapunov path on the noise grid.
pub fn reduced_lyapunov_path(
    family: &ScalarFamily,
    modes: usize,
    substeps: Option<usize>,
) -> Vec<f64> {
    let dt = (family.t_end - family.t0) / modes as f64;
    let mut out = vec![0.0; modes + 1];
    out[modes] = -family.g;
    for k in (0..modes).rev() {
        let t_hi = family.t0 + (k + 1) as f64 * dt;
        out[k] = step_back(out[k + 1], t_hi, dt, substeps, |x| family.lyapunov_rhs(x));
    }
    out
}

fn step_back(p: f64, t_hi: f64, dt: f64, substeps: Option<usize>, f: impl Fn(f64) -> f64) -> f64 {
    match substeps {
        Some(s) => rk4_steps(p, dt / s as f64, s, f),
        None => scalar_back(p, t_hi, t_hi - dt, f),
    }
}

/// Largest deviation of an operator path from a reduced path: diagonal
/// entries against `reduced[k][grade]`, off-diagonal entries against 0.
pub fn reduction_defect(path: &[Mat], reduced: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (pk, rk) in path.iter().zip(reduced) {
        for ((i, j), z) in pk.indexed_iter() {
            let want = if i == j { rk[grade(i)] } else { 0.0 };
            worst = worst.max((z - c(want)).norm());
        }
    }
    worst
}

/// Largest index in the monomial `mask`, 0 for the empty one.
pub fn grade(mask: usize) -> usize {
    (usize::BITS - mask.leading_zeros()) as usize
}

fn rk4_steps(mut p: f64, h: f64, steps: usize, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..steps {
        let k1 = f(p);
        let k2 = f(p - 0.5 * h * k1);
        let k3 = f(p - 0.5 * h * k2);
        let k4 = f(p - h * k3);
        p -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    p
}

/// RK4 from `t_end` back to `t` with at most `1e-4` step length.
fn scalar_back(terminal: f64, t_end: f64, t: f64, f: impl Fn(f64) -> f64) -> f64 {
    let span = t_end - t;
    if span <= 0.0 {
        return terminal;
    }
    let steps = (span / 1e-4).ceil() as usize;
    rk4_steps(terminal, span / steps as f64, steps, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lyapunov_without_dynamics_is_affine() {
        let fam = ScalarFamily {
            a: 0.0,
            c: 0.0,
            ..ScalarFamily::default()
        };
        // phi' = q  =>  phi(t) = -g - q (T - t)
        assert!((fam.lyapunov(0.25) - (-1.0 - 0.5 * 0.75)).abs() < 1e-12);
    }

    #[test]
    fn budget_refuses_large_modes() {
        assert!(matches!(
            check_budget(16),
            Err(QslqError::MemoryBudget { modes: 16, .. })
        ));
        assert!(check_budget(8).is_ok());
    }
}
