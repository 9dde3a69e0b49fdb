use super::{
    apply_gain_inverse, gain_blocks, InversionPolicy, RiccatiPath, StepCoefficients, Weights,
};
use crate::clifford::{check_adapted, right_mul_generator};
use crate::error::{QslqError, Result};
use crate::linalg::{adj_dot_mat, c, dot, Vect};
use crate::qsde::{CoefficientPath, TimeGrid};

/// Probe data for the pairing identity started at node `t`: initial values
/// in `H_t` and adapted sources on steps `t..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakProbes {
    pub xi1: Vect,
    pub xi2: Vect,
    pub mu1: Vec<Vect>,
    pub mu2: Vec<Vect>,
    pub nu1: Vec<Vect>,
    pub nu2: Vec<Vect>,
}

fn probe_path(
    xi: &Vect,
    mu: &[Vect],
    nu: &[Vect],
    t: usize,
    coeffs: &CoefficientPath,
    dt: f64,
) -> Vec<Vect> {
    let n = coeffs.steps();
    let mut z = vec![xi.clone()];
    for k in t..n {
        let cur = &z[k - t];
        let drift = coeffs.a[k].matrix().dot(cur) + &mu[k - t];
        let diff = coeffs.c[k].matrix().dot(cur) + &nu[k - t];
        let next = cur + &(drift * c(dt)) + right_mul_generator(&diff, k + 1, dt);
        z.push(next);
    }
    z
}

/// Absolute defect of the pairing identity characterizing a weak solution,
/// with left-endpoint quadrature on the noise grid.
pub fn weak_solution_residual(
    path: &RiccatiPath,
    probes: &WeakProbes,
    coeffs: &CoefficientPath,
    weights: &Weights,
    grid: &TimeGrid,
    t: usize,
    policy: InversionPolicy,
) -> Result<f64> {
    let n = grid.steps();
    if t > n || path.p.len() != n + 1 {
        return Err(QslqError::FiltrationIndex { index: t, modes: n });
    }
    let steps = n - t;
    for src in [&probes.mu1, &probes.mu2, &probes.nu1, &probes.nu2] {
        if src.len() != steps {
            return Err(QslqError::Dimension(format!(
                "probe sources must cover {steps} steps"
            )));
        }
        for (i, v) in src.iter().enumerate() {
            check_adapted(v, t + i)?;
        }
    }
    check_adapted(&probes.xi1, t)?;
    check_adapted(&probes.xi2, t)?;
    let dt = grid.dt();
    let z1 = probe_path(&probes.xi1, &probes.mu1, &probes.nu1, t, coeffs, dt);
    let z2 = probe_path(&probes.xi2, &probes.mu2, &probes.nu2, t, coeffs, dt);

    let mut lhs = dot(&z2[steps], &weights.g.matrix().dot(&z1[steps]));
    let mut rhs = dot(&z2[0], &path.p[t].dot(&z1[0]));
    for k in t..n {
        let i = k - t;
        let p = &path.p[k];
        let s = StepCoefficients::at(coeffs, weights, k);
        let (kk, l) = gain_blocks(p, &s);
        let klz = apply_gain_inverse(
            &kk,
            &l.dot(&z1[i]).insert_axis(ndarray::Axis(1)).to_owned(),
            policy,
            k,
        )?;
        let lkl = adj_dot_mat(&l, &klz).column(0).to_owned();
        lhs += (dot(&z2[i], &s.m.dot(&z1[i])) - dot(&z2[i], &lkl)) * dt;
        let cz1 = s.c.dot(&z1[i]) + &probes.nu1[i];
        let cz2 = s.c.dot(&z2[i]);
        let terms = dot(&probes.mu2[i], &p.dot(&z1[i]))
            + dot(&z2[i], &p.dot(&probes.mu1[i]))
            + dot(&probes.nu2[i], &p.dot(&cz1))
            + dot(&cz2, &p.dot(&probes.nu1[i]));
        rhs += terms * dt;
    }
    Ok((lhs - rhs).norm())
}
