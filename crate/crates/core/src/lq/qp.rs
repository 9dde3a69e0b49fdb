//! Brute-force open-loop optimum: the cost is an explicit quadratic in the
//! stacked control, assembled from impulse responses.

use rayon::prelude::*;

use super::ProblemSpec;
use crate::error::{QslqError, Result};
use crate::linalg::{
    adj_dot, adj_dot_mat, c, dot, hermitian_eigen, hpd_solve, inf_norm, vec_norm, Mat, Vect, ONE,
};
use crate::qsde::{solve_forward, solve_forward_homogeneous, ControlPath};

/// Relative eigenvalue threshold for flat directions of the Hessian.
const FLAT_TOL: f64 = 1e-10;

/// `J(u) = 1/2 u^* H u + Re(g^* u) + c` over the stacked control
/// (`u[k * m + i]` is component `i` at step `k`).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    pub h: Mat,
    pub g: Vect,
    pub c: f64,
    pub control_dim: usize,
}

impl QuadraticCost {
    pub fn eval(&self, u: &Vect) -> f64 {
        0.5 * dot(u, &self.h.dot(u)).re + dot(&self.g, u).re + self.c
    }

    pub fn stack(&self, u: &[Vect]) -> Vect {
        let m = self.control_dim;
        Vect::from_shape_fn(u.len() * m, |i| u[i / m][i % m])
    }

    pub fn unstack(&self, u: &Vect) -> ControlPath {
        let m = self.control_dim;
        (0..u.len() / m)
            .map(|k| u.slice(ndarray::s![k * m..(k + 1) * m]).to_owned())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpenLoopSolution {
    pub u: ControlPath,
    pub j: f64,
    pub quad: QuadraticCost,
    /// `||H u + g|| / max(1, ||g||)`.
    pub residual: f64,
    /// Orthonormal basis of the Hessian's numerical null space.
    pub flat_directions: Vec<Vect>,
}

/// Assembles the quadratic and returns its minimum-norm minimizer.
pub fn open_loop_qp(spec: &ProblemSpec) -> Result<OpenLoopSolution> {
    spec.validate()?;
    let n = spec.steps();
    let m = spec.control_dim();
    let dim = spec.dim();
    let dt = spec.grid.dt();
    let width = n * m;

    let zero = spec.zero_controls();
    let base = solve_forward(&spec.eta, &zero, &spec.coeffs, &spec.grid)?;
    let origin = Vect::zeros(dim);
    let columns: Vec<Vec<Vect>> = (0..width)
        .into_par_iter()
        .map(|col| {
            let mut u = zero.clone();
            u[col / m][col % m] = ONE;
            solve_forward_homogeneous(&origin, &u, &spec.coeffs, &spec.grid).map(|p| p.x)
        })
        .collect::<Result<_>>()?;
    // responses[k] is dim x width: node-k state per unit control.
    let responses: Vec<Mat> = (0..=n)
        .map(|k| Mat::from_shape_fn((dim, width), |(i, j)| columns[j][k][i]))
        .collect();

    let mut h = Mat::zeros((width, width));
    let mut g = Vect::zeros(width);
    let mut c0 = 0.0;
    for k in 0..=n {
        let (w, scale) = if k < n {
            (spec.weights.m[k].matrix(), dt)
        } else {
            (spec.weights.g.matrix(), 1.0)
        };
        let phi = &responses[k];
        let wphi = w.dot(phi);
        h = h + adj_dot_mat(phi, &wphi) * c(scale);
        let x0 = base.node(k);
        g = g + adj_dot(&wphi, x0) * c(scale);
        c0 += 0.5 * scale * dot(x0, &w.dot(x0)).re;
    }
    for k in 0..n {
        let r = &spec.weights.r[k];
        for i in 0..m {
            for j in 0..m {
                h[(k * m + i, k * m + j)] += r[(i, j)] * dt;
            }
        }
    }
    crate::linalg::symmetrize(&mut h);
    let quad = QuadraticCost {
        h,
        g,
        c: c0,
        control_dim: m,
    };

    let (ustar, flat) = minimize(&quad)?;
    let residual = vec_norm(&(quad.h.dot(&ustar) + &quad.g)) / vec_norm(&quad.g).max(1.0);
    Ok(OpenLoopSolution {
        j: quad.eval(&ustar),
        u: quad.unstack(&ustar),
        residual,
        flat_directions: flat,
        quad,
    })
}

fn minimize(quad: &QuadraticCost) -> Result<(Vect, Vec<Vect>)> {
    let h = &quad.h;
    let n = h.nrows();
    let rhs = Mat::from_shape_fn((n, 1), |(i, _)| -quad.g[i]);
    // A shifted Cholesky that succeeds certifies there is no flat direction.
    let tau = FLAT_TOL * inf_norm(h).max(1.0);
    let mut shifted = h.clone();
    for i in 0..n {
        shifted[(i, i)] -= c(tau);
    }
    if crate::linalg::cholesky(&shifted).is_some() {
        if let Some(x) = hpd_solve(h, &rhs) {
            return Ok((x.column(0).to_owned(), Vec::new()));
        }
    }
    let (vals, vecs) = hermitian_eigen(h);
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tau = FLAT_TOL * top.max(1.0);
    let proj = adj_dot(&vecs, &quad.g);
    let mut flat = Vec::new();
    let mut flat_mass = 0.0f64;
    let mut coef = Vect::zeros(n);
    for (i, v) in vals.iter().enumerate() {
        if *v > tau {
            coef[i] = -proj[i] / *v;
        } else {
            flat.push(vecs.column(i).to_owned());
            flat_mass += proj[i].norm_sqr();
        }
    }
    let flat_mass = flat_mass.sqrt();
    if flat_mass > 1e-8 * vec_norm(&quad.g).max(1.0) {
        return Err(QslqError::Unbounded { mass: flat_mass });
    }
    Ok((vecs.dot(&coef), flat))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_hessian_without_linear_term_gives_minimum_norm() {
        let quad = QuadraticCost {
            h: Mat::zeros((2, 2)),
            g: Vect::zeros(2),
            c: 0.0,
            control_dim: 1,
        };
        let (u, flat) = minimize(&quad).unwrap();
        assert_eq!(vec_norm(&u), 0.0);
        assert_eq!(flat.len(), 2);
    }

    #[test]
    fn linear_term_on_flat_direction_is_unbounded() {
        let mut h = Mat::zeros((2, 2));
        h[(0, 0)] = c(1.0);
        let mut g = Vect::zeros(2);
        g[1] = c(1.0);
        let quad = QuadraticCost {
            h,
            g,
            c: 0.0,
            control_dim: 1,
        };
        assert!(matches!(minimize(&quad), Err(QslqError::Unbounded { .. })));
    }
}
