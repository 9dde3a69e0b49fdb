//! Operator-valued Riccati equation
//! `P' + PA + A^*P + C^*PC + M - L^* K^{-1} L = 0`, `P(T) = G`, with
//! `K = R + D^*PD` and `L = B^*P + D^*PC`.

mod lyapunov;
mod weak;

pub use lyapunov::{lyapunov_adjoint, AdjointPath};
pub use weak::{weak_solution_residual, WeakProbes};

use serde::{Deserialize, Serialize};

use crate::clifford::{Adjointness, SuperOperator, PSD_TOL};
use crate::error::{QslqError, Result};
use crate::linalg::{
    adj, adj_dot_mat, c, fro_norm, hermitian_defect, hermitian_eigen, hermitian_eigenvalues,
    hpd_solve, inf_norm, symmetrize, Mat,
};
use crate::qsde::{CoefficientPath, TimeGrid};

/// Relative threshold below which an eigenvalue of `K` counts as zero.
pub const GAIN_THRESHOLD: f64 = 1e-10;

/// Control size above which `K` is inverted through a shifted Cholesky test
/// instead of a full eigendecomposition.
const EIGEN_LIMIT: usize = 32;

/// How `K^{-1}` is applied when `K` approaches singularity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
#[derive(Default)]
pub enum InversionPolicy {
    #[default]
    Strict,
    PseudoInverse {
        ridge: f64,
    },
}

/// Weights of the cost `1/2 (sum dt (<Mx,x> + <Ru,u>) + <Gx_N, x_N>)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub m: Vec<SuperOperator>,
    pub r: Vec<Mat>,
    pub g: SuperOperator,
}

impl Weights {
    pub fn validate(&self, grid: &TimeGrid, control_dim: usize) -> Result<()> {
        let n = grid.steps();
        let dim = 1usize << n;
        if self.m.len() != n || self.r.len() != n {
            return Err(QslqError::Dimension(format!(
                "weights must cover {n} steps"
            )));
        }
        if self.g.dim() != dim || self.m.iter().any(|m| m.dim() != dim) {
            return Err(QslqError::Dimension(
                "state weight has the wrong size".into(),
            ));
        }
        // Operators flagged PSD were certified when they were built.
        let unchecked = |op: &SuperOperator| op.kind() != Adjointness::Psd;
        for (k, m) in self.m.iter().enumerate().filter(|(_, m)| unchecked(m)) {
            let lo = crate::linalg::min_eig(m.matrix());
            if lo < -PSD_TOL {
                return Err(QslqError::NotPositive {
                    what: format!("M at step {k}"),
                    min_eig: lo,
                });
            }
        }
        let lo = if unchecked(&self.g) {
            crate::linalg::min_eig(self.g.matrix())
        } else {
            0.0
        };
        if lo < -PSD_TOL {
            return Err(QslqError::NotPositive {
                what: "G".into(),
                min_eig: lo,
            });
        }
        for (k, r) in self.r.iter().enumerate() {
            if r.dim() != (control_dim, control_dim) {
                return Err(QslqError::Dimension(format!(
                    "R at step {k} is {:?}",
                    r.dim()
                )));
            }
            let defect = hermitian_defect(r);
            if defect > 1e-12 * fro_norm(r).max(1.0) {
                return Err(QslqError::NotHermitian {
                    what: format!("R at step {k}"),
                    defect,
                });
            }
            let lo = crate::linalg::min_eig(r);
            if lo < -PSD_TOL {
                return Err(QslqError::NotPositive {
                    what: format!("R at step {k}"),
                    min_eig: lo,
                });
            }
        }
        Ok(())
    }
}

/// Coefficients frozen on one step.
#[derive(Debug, Clone, Copy)]
pub struct StepCoefficients<'a> {
    pub a: &'a Mat,
    pub b: &'a Mat,
    pub c: &'a Mat,
    pub d: &'a Mat,
    pub m: &'a Mat,
    pub r: &'a Mat,
}

impl<'a> StepCoefficients<'a> {
    pub fn at(coeffs: &'a CoefficientPath, weights: &'a Weights, k: usize) -> Self {
        Self {
            a: coeffs.a[k].matrix(),
            b: &coeffs.b[k],
            c: coeffs.c[k].matrix(),
            d: &coeffs.d[k],
            m: weights.m[k].matrix(),
            r: &weights.r[k],
        }
    }
}

/// `K^{-1} L` under `policy`. `node` only labels errors.
pub fn apply_gain_inverse(k: &Mat, l: &Mat, policy: InversionPolicy, node: usize) -> Result<Mat> {
    let m = k.nrows();
    if m > EIGEN_LIMIT {
        let scale = inf_norm(k).max(1.0);
        let tau = GAIN_THRESHOLD * scale;
        let mut shifted = k.clone();
        for i in 0..m {
            shifted[(i, i)] -= c(tau);
        }
        if crate::linalg::cholesky(&shifted).is_some() {
            if let Some(x) = hpd_solve(k, l) {
                return Ok(x);
            }
        }
    }
    let (vals, vecs) = hermitian_eigen(k);
    let norm = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tau = GAIN_THRESHOLD * norm.max(1.0);
    let lo = vals.first().copied().unwrap_or(0.0);
    let ridge = match policy {
        InversionPolicy::Strict => {
            if lo < tau {
                return Err(QslqError::SingularGain {
                    node,
                    min_eig: lo,
                    threshold: tau,
                });
            }
            0.0
        }
        InversionPolicy::PseudoInverse { ridge } => ridge,
    };
    let proj = adj_dot_mat(&vecs, l);
    let mut scaled = proj;
    for (i, v) in vals.iter().enumerate() {
        let shifted = v + ridge;
        let f = if shifted > tau { 1.0 / shifted } else { 0.0 };
        scaled.row_mut(i).mapv_inplace(|z| z * f);
    }
    Ok(vecs.dot(&scaled))
}

/// `(K, L)` at `p`.
pub fn gain_blocks(p: &Mat, s: &StepCoefficients) -> (Mat, Mat) {
    let pc = p.dot(s.c);
    let pd = p.dot(s.d);
    let k = s.r + &adj_dot_mat(s.d, &pd);
    let l = adj_dot_mat(s.b, p) + adj_dot_mat(s.d, &pc);
    let mut k = k;
    symmetrize(&mut k);
    (k, l)
}

/// `dP/dt`, symmetrized.
pub fn riccati_rhs(
    p: &Mat,
    s: &StepCoefficients,
    policy: InversionPolicy,
    node: usize,
) -> Result<Mat> {
    riccati_rhs_signed(p, s, policy, node, 1.0)
}

/// `quad` multiplies the `L^* K^-1 L` term; only the mutation fixture of the
/// verification suite passes anything other than 1.
fn riccati_rhs_signed(
    p: &Mat,
    s: &StepCoefficients,
    policy: InversionPolicy,
    node: usize,
    quad: f64,
) -> Result<Mat> {
    let pa = p.dot(s.a);
    let pc = p.dot(s.c);
    let cpc = adj_dot_mat(s.c, &pc);
    let pd = p.dot(s.d);
    let mut k = s.r + &adj_dot_mat(s.d, &pd);
    symmetrize(&mut k);
    let l = adj_dot_mat(s.b, p) + adj_dot_mat(s.d, &pc);
    let kl = apply_gain_inverse(&k, &l, policy, node)?;
    let lkl = adj_dot_mat(&l, &kl);
    let mut out = -(&pa + &adj(&pa) + cpc + s.m - lkl * c(quad));
    symmetrize(&mut out);
    Ok(out)
}

/// Gains at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    pub k: Mat,
    pub l: Mat,
    pub theta: Mat,
    pub min_eig_k: f64,
    pub max_eig_k: f64,
    /// `||R Theta + B^*P + D^*Pi||` with `Pi = P(C + D Theta)`.
    pub stationarity: f64,
}

pub fn gains_at(
    p: &Mat,
    s: &StepCoefficients,
    policy: InversionPolicy,
    node: usize,
) -> Result<Gains> {
    let (k, l) = gain_blocks(p, s);
    let theta = -apply_gain_inverse(&k, &l, policy, node)?;
    let pi = p.dot(&(s.c + &s.d.dot(&theta)));
    let resid = s.r.dot(&theta) + adj_dot_mat(s.b, p) + adj_dot_mat(s.d, &pi);
    let ev = hermitian_eigenvalues(&k);
    Ok(Gains {
        min_eig_k: ev.first().copied().unwrap_or(0.0),
        max_eig_k: ev.last().copied().unwrap_or(0.0),
        stationarity: fro_norm(&resid),
        k,
        l,
        theta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiPath {
    /// `P_0 .. P_N` on the noise grid.
    pub p: Vec<Mat>,
    pub substeps: usize,
    /// `||(I - Pi_k) P_k Pi_k||` per node.
    pub range_defect: Vec<f64>,
    /// Largest `||P_k - P_k^*||` before symmetrization of the stored node.
    pub hermitian_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainPath {
    /// One entry per step `0..N`, evaluated at the left node with that step's
    /// coefficients.
    pub k: Vec<Mat>,
    pub l: Vec<Mat>,
    pub theta: Vec<Mat>,
    pub min_eig_k: Vec<f64>,
    pub max_eig_k: Vec<f64>,
    pub stationarity: Vec<f64>,
}

fn range_defect(p: &Mat, k: usize) -> f64 {
    let lo = 1usize << k;
    p.slice(ndarray::s![lo.., ..lo])
        .iter()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// One classical RK4 step of length `h` backward in time.
pub(crate) fn rk4_back<F>(p: &Mat, h: f64, f: F) -> Result<Mat>
where
    F: Fn(&Mat) -> Result<Mat>,
{
    let k1 = f(p)?;
    let k2 = f(&(p - &(&k1 * c(h / 2.0))))?;
    let k3 = f(&(p - &(&k2 * c(h / 2.0))))?;
    let k4 = f(&(p - &(&k3 * c(h))))?;
    let incr = k1 + (k2 + k3) * c(2.0) + k4;
    Ok(p - &(incr * c(h / 6.0)))
}

/// Integrates backward from `P(T) = G` with `substeps` RK4 steps per noise
/// step and evaluates the gains at every left node.
pub fn integrate_riccati(
    coeffs: &CoefficientPath,
    weights: &Weights,
    grid: &TimeGrid,
    substeps: usize,
    policy: InversionPolicy,
) -> Result<(RiccatiPath, GainPath)> {
    integrate_riccati_signed(coeffs, weights, grid, substeps, policy, 1.0)
}

pub(crate) fn integrate_riccati_signed(
    coeffs: &CoefficientPath,
    weights: &Weights,
    grid: &TimeGrid,
    substeps: usize,
    policy: InversionPolicy,
    quad: f64,
) -> Result<(RiccatiPath, GainPath)> {
    if substeps == 0 {
        return Err(QslqError::Invalid("substeps must be at least 1".into()));
    }
    coeffs.validate(grid)?;
    weights.validate(grid, coeffs.control_dim)?;
    let n = grid.steps();
    let h = grid.dt() / substeps as f64;
    let mut p = vec![Mat::zeros((0, 0)); n + 1];
    p[n] = weights.g.matrix().clone();
    let mut worst = 0.0f64;
    for k in (0..n).rev() {
        let s = StepCoefficients::at(coeffs, weights, k);
        let mut cur = p[k + 1].clone();
        for _ in 0..substeps {
            cur = rk4_back(&cur, h, |x| riccati_rhs_signed(x, &s, policy, k, quad))?;
        }
        worst = worst.max(hermitian_defect(&cur));
        symmetrize(&mut cur);
        p[k] = cur;
    }
    let mut gains = GainPath {
        k: Vec::with_capacity(n),
        l: Vec::with_capacity(n),
        theta: Vec::with_capacity(n),
        min_eig_k: Vec::with_capacity(n),
        max_eig_k: Vec::with_capacity(n),
        stationarity: Vec::with_capacity(n),
    };
    for k in 0..n {
        let s = StepCoefficients::at(coeffs, weights, k);
        let g = gains_at(&p[k], &s, policy, k)?;
        gains.k.push(g.k);
        gains.l.push(g.l);
        gains.theta.push(g.theta);
        gains.min_eig_k.push(g.min_eig_k);
        gains.max_eig_k.push(g.max_eig_k);
        gains.stationarity.push(g.stationarity);
    }
    let range = p
        .iter()
        .enumerate()
        .map(|(k, pk)| range_defect(pk, k))
        .collect();
    Ok((
        RiccatiPath {
            p,
            substeps,
            range_defect: range,
            hermitian_defect: worst,
        },
        gains,
    ))
}

/// Per-node spectrum extremes of a Hermitian path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityScan {
    pub min_eig: Vec<f64>,
    pub max_eig: Vec<f64>,
    /// Nodes whose smallest eigenvalue is below the threshold.
    pub flagged: Vec<usize>,
}

impl PositivityScan {
    pub fn worst(&self) -> f64 {
        self.min_eig.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn positivity_scan(path: &[Mat], threshold: f64) -> PositivityScan {
    let mut scan = PositivityScan {
        min_eig: Vec::with_capacity(path.len()),
        max_eig: Vec::with_capacity(path.len()),
        flagged: Vec::new(),
    };
    for (i, m) in path.iter().enumerate() {
        let ev = hermitian_eigenvalues(m);
        let lo = ev.first().copied().unwrap_or(0.0);
        scan.min_eig.push(lo);
        scan.max_eig.push(ev.last().copied().unwrap_or(0.0));
        if lo < threshold {
            scan.flagged.push(i);
        }
    }
    scan
}

/// JSON export: one entry per node with its time and dense matrix.
pub fn path_to_json(path: &RiccatiPath, grid: &TimeGrid) -> serde_json::Value {
    serde_json::Value::Array(
        path.p
            .iter()
            .enumerate()
            .map(|(k, p)| {
                serde_json::json!({
                    "node": k,
                    "t": grid.time(k),
                    "P": crate::clifford::matrix_to_json(p),
                })
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_zero(m: &Mat) -> bool {
        m.iter().all(|z| *z == crate::linalg::ZERO)
    }
    use crate::linalg::identity;

    fn unit_weights(grid: &TimeGrid, m: usize, g: f64) -> Weights {
        let dim = 1 << grid.steps();
        Weights {
            m: vec![SuperOperator::zero(dim); grid.steps()],
            r: vec![identity(m); grid.steps()],
            g: SuperOperator::psd(identity(dim) * c(g)).unwrap(),
        }
    }

    #[test]
    fn zero_dynamics_keep_terminal_value() {
        let g = TimeGrid::new(0.0, 1.0, 3).unwrap();
        let co = CoefficientPath::zero(&g, 1);
        let w = unit_weights(&g, 1, 2.0);
        let (path, gains) = integrate_riccati(&co, &w, &g, 4, InversionPolicy::Strict).unwrap();
        for p in &path.p {
            assert!(fro_norm(&(p - w.g.matrix())) < 1e-14);
        }
        assert!(gains.min_eig_k.iter().all(|&e| (e - 1.0).abs() < 1e-14));
        assert!(gains.theta.iter().all(is_zero));
    }

    #[test]
    fn unit_control_weight_gives_minus_b_star_p() {
        let g = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let mut co = CoefficientPath::zero(&g, 1);
        co.b[0][(0, 0)] = c(0.7);
        let w = unit_weights(&g, 1, 1.5);
        let p = Mat::eye(4) * c(1.5);
        let s = StepCoefficients::at(&co, &w, 0);
        let gains = gains_at(&p, &s, InversionPolicy::Strict, 0).unwrap();
        let expect = -adj_dot_mat(&co.b[0], &p);
        assert!(fro_norm(&(gains.theta - expect)) < 1e-14);
        assert!(gains.stationarity < 1e-12);
    }

    #[test]
    fn singular_gain_is_surfaced() {
        let k = Mat::zeros((1, 1));
        let l = Mat::eye(1);
        match apply_gain_inverse(&k, &l, InversionPolicy::Strict, 3) {
            Err(QslqError::SingularGain { node, .. }) => assert_eq!(node, 3),
            other => panic!("expected singular gain, got {other:?}"),
        }
        let x =
            apply_gain_inverse(&k, &l, InversionPolicy::PseudoInverse { ridge: 0.0 }, 3).unwrap();
        assert!(is_zero(&x));
        let x =
            apply_gain_inverse(&k, &l, InversionPolicy::PseudoInverse { ridge: 0.5 }, 3).unwrap();
        assert!((x[(0, 0)].re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn large_gain_path_matches_eigen_path() {
        let m = 40;
        let a = Mat::from_shape_fn((m, m), |(i, j)| {
            crate::linalg::C64::new(((i * j) % 7) as f64, (i as f64 - j as f64) * 0.1)
        });
        let k = adj_dot_mat(&a, &a) + Mat::eye(m);
        let l = Mat::from_shape_fn((m, 3), |(i, j)| c((i + j) as f64));
        let fast = apply_gain_inverse(&k, &l, InversionPolicy::Strict, 0).unwrap();
        assert!(fro_norm(&(k.dot(&fast) - &l)) < 1e-8 * fro_norm(&l));
    }
}
