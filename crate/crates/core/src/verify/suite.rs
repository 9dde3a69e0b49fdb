//! The identity and convergence suite.

use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::algebra::{
    algebra_defects, brownian_square_defect, ito_isometry_defect, martingale_defect,
};
use super::family::ScalarFamily;
use super::ladder::{convergence_study, OrderTable};
use super::random::{
    cell_rng, random_adapted, random_controls, random_problem, RandomScales, Structure,
};
use crate::error::QslqError;
use crate::linalg::{Vect, C64};
use crate::lq::{
    completion_of_squares, cost, flow_reconstruct_p, open_loop_qp, stationarity_residual,
    synthesize_and_simulate, value, variation_checks, ProblemSpec, VariationMode,
};
use crate::qsde::{galerkin_truncate, solve_forward};
use crate::riccati::{
    integrate_riccati_signed, lyapunov_adjoint, positivity_scan, weak_solution_residual, GainPath,
    InversionPolicy, RiccatiPath, WeakProbes,
};

/// Tolerances of every check. Keys ending in `_c` are constants `C` of a
/// `C * dt` bound; the others are absolute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Exact identities of the algebra, martingale round trips, Galerkin.
    pub exact: f64,
    /// Relative Ito isometry defect.
    pub ito: f64,
    /// Relative rounding slack of exact discrete inequalities.
    pub rounding: f64,
    /// Relative defect of the quadratic scaling law.
    pub scaling: f64,
    /// Slack on smallest eigenvalues of positive operators.
    pub positivity: f64,
    /// Scalar reduction against the classical ODE oracle.
    pub oracle: f64,
    pub value_c: f64,
    pub qp_gap_c: f64,
    pub completion_c: f64,
    pub stationarity_c: f64,
    pub variation_c: f64,
    pub duality_c: f64,
    pub p_error_c: f64,
    pub hermitian_c: f64,
    pub gain_residual_c: f64,
    pub pi_residual_c: f64,
    pub weak_c: f64,
    pub order_min: f64,
    pub rk4_order_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            exact: 1e-12,
            ito: 1e-10,
            rounding: 1e-10,
            scaling: 1e-9,
            positivity: 1e-8,
            oracle: 1e-8,
            value_c: 0.5,
            qp_gap_c: 0.25,
            completion_c: 2.0,
            stationarity_c: 3.0,
            variation_c: 0.1,
            duality_c: 1.0,
            p_error_c: 1.0,
            hermitian_c: 0.1,
            gain_residual_c: 1.5,
            pi_residual_c: 2.0,
            weak_c: 2.0,
            order_min: 0.9,
            rk4_order_min: 3.5,
        }
    }
}

impl Tolerances {
    pub const KEYS: [&'static str; 19] = [
        "exact",
        "ito",
        "rounding",
        "scaling",
        "positivity",
        "oracle",
        "value_c",
        "qp_gap_c",
        "completion_c",
        "stationarity_c",
        "variation_c",
        "duality_c",
        "p_error_c",
        "hermitian_c",
        "gain_residual_c",
        "pi_residual_c",
        "weak_c",
        "order_min",
        "rk4_order_min",
    ];

    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "exact" => &mut self.exact,
            "ito" => &mut self.ito,
            "rounding" => &mut self.rounding,
            "scaling" => &mut self.scaling,
            "positivity" => &mut self.positivity,
            "oracle" => &mut self.oracle,
            "value_c" => &mut self.value_c,
            "qp_gap_c" => &mut self.qp_gap_c,
            "completion_c" => &mut self.completion_c,
            "stationarity_c" => &mut self.stationarity_c,
            "variation_c" => &mut self.variation_c,
            "duality_c" => &mut self.duality_c,
            "p_error_c" => &mut self.p_error_c,
            "hermitian_c" => &mut self.hermitian_c,
            "gain_residual_c" => &mut self.gain_residual_c,
            "pi_residual_c" => &mut self.pi_residual_c,
            "weak_c" => &mut self.weak_c,
            "order_min" => &mut self.order_min,
            "rk4_order_min" => &mut self.rk4_order_min,
            _ => return None,
        })
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        let mut t = *self;
        t.slot(key).map(|v| *v)
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<(), QslqError> {
        let slot = self
            .slot(key)
            .ok_or_else(|| QslqError::Invalid(format!("unknown tolerance key `{key}`")))?;
        *slot = value;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), QslqError> {
        for key in Self::KEYS {
            let v = self.get(key).unwrap_or(f64::NAN);
            if !(v > 0.0 && v.is_finite()) {
                return Err(QslqError::Invalid(format!(
                    "tolerance `{key}` must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Deliberate corruptions used to show that the suite detects errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    /// Flip the sign of `L^* K^-1 L` in the Riccati equation.
    RiccatiSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub modes: Vec<usize>,
    pub controls: Vec<usize>,
    pub problems: usize,
    /// Random controls per problem for the convexity and completion checks.
    pub samples: usize,
    /// The scalar-family ladder runs from `ladder_start` to
    /// `ladder_start * 2^halvings`.
    pub ladder_start: usize,
    pub halvings: usize,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub structure: Structure,
    pub policy: InversionPolicy,
    pub substeps: usize,
    pub scales: RandomScales,
    pub family: ScalarFamily,
    pub mutation: Option<Mutation>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            modes: vec![4, 6, 8],
            controls: vec![1, 2],
            problems: 5,
            samples: 100,
            ladder_start: 4,
            halvings: 1,
            tolerances: Tolerances::default(),
            seed: 0,
            structure: Structure::Filtration,
            policy: InversionPolicy::Strict,
            substeps: 4,
            scales: RandomScales::default(),
            family: ScalarFamily::default(),
            mutation: None,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<(), QslqError> {
        self.tolerances.validate()?;
        if self.modes.is_empty() || self.controls.is_empty() {
            return Err(QslqError::Invalid(
                "mode and control lists must be nonempty".into(),
            ));
        }
        if let Some(n) = self.modes.iter().find(|&&n| n < 2) {
            return Err(QslqError::Invalid(format!("mode count {n} below 2")));
        }
        if self.controls.contains(&0) {
            return Err(QslqError::Invalid("control dimension 0".into()));
        }
        if self.substeps == 0 {
            return Err(QslqError::Invalid("substeps must be at least 1".into()));
        }
        if self.halvings == 0 {
            return Err(QslqError::Invalid(
                "halving depth must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One row of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    #[serde(rename = "N")]
    pub modes: usize,
    pub m: usize,
    pub seed: u64,
    pub measured: f64,
    pub tolerance: f64,
    /// Observed order for ladder checks; these pass when both the finest
    /// error is within tolerance and the order reaches its threshold.
    pub order: Option<f64>,
    pub pass: bool,
}

impl CheckResult {
    pub fn bound(check: &str, fp: (usize, usize, u64), measured: f64, tolerance: f64) -> Self {
        Self {
            check: check.to_string(),
            modes: fp.0,
            m: fp.1,
            seed: fp.2,
            measured,
            tolerance,
            order: None,
            pass: measured <= tolerance,
        }
    }

    fn failed(check: &str, fp: (usize, usize, u64), tolerance: f64) -> Self {
        Self {
            pass: false,
            ..Self::bound(check, fp, f64::INFINITY, tolerance)
        }
    }
}

type Measured = std::result::Result<f64, String>;

/// Collects rows for one problem; every check is isolated from panics and
/// errors of the others.
struct Rows {
    fp: (usize, usize, u64),
    out: Vec<CheckResult>,
}

impl Rows {
    fn check(&mut self, name: &str, tolerance: f64, f: impl FnOnce() -> Measured) {
        let row = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(Ok(v)) if !v.is_nan() => CheckResult::bound(name, self.fp, v, tolerance),
            _ => CheckResult::failed(name, self.fp, tolerance),
        };
        self.out.push(row);
    }
}

fn err(e: &QslqError) -> String {
    e.to_string()
}

/// Everything the per-problem checks share, computed once.
struct Solved {
    spec: ProblemSpec,
    path: RiccatiPath,
    gains: GainPath,
    closed: f64,
}

fn solve(spec: ProblemSpec, cfg: &SuiteConfig) -> std::result::Result<Solved, String> {
    let quad = match cfg.mutation {
        Some(Mutation::RiccatiSign) => -1.0,
        None => 1.0,
    };
    let (path, gains) = integrate_riccati_signed(
        &spec.coeffs,
        &spec.weights,
        &spec.grid,
        cfg.substeps,
        cfg.policy,
        quad,
    )
    .map_err(|e| err(&e))?;
    let closed = synthesize_and_simulate(&spec, &gains)
        .map_err(|e| err(&e))?
        .cost
        .total;
    Ok(Solved {
        spec,
        path,
        gains,
        closed,
    })
}

fn random_probes(spec: &ProblemSpec, t: usize, rng: &mut rand_chacha::ChaCha8Rng) -> WeakProbes {
    let dim = spec.dim();
    let n = spec.steps();
    let mut draw = |k: usize| random_adapted(rng, dim, k);
    let xi1 = draw(t);
    let xi2 = draw(t);
    let mu1 = (t..n).map(&mut draw).collect();
    let mu2 = (t..n).map(&mut draw).collect();
    let nu1 = (t..n).map(&mut draw).collect();
    let nu2 = (t..n).map(&mut draw).collect();
    WeakProbes {
        xi1,
        xi2,
        mu1,
        mu2,
        nu1,
        nu2,
    }
}

/// All per-problem checks for the random problem drawn with `seed`.
pub fn problem_checks(cfg: &SuiteConfig, n: usize, m: usize, seed: u64) -> Vec<CheckResult> {
    let tol = &cfg.tolerances;
    let mut rows = Rows {
        fp: (n, m, seed),
        out: Vec::new(),
    };
    let space = crate::clifford::CliffordSpace::new(n, cfg.scales.horizon / n as f64);
    rows.check("algebra", tol.exact, || {
        let sp = space.as_ref().map_err(err)?;
        algebra_defects(sp, &mut cell_rng(seed, n, m, 1), 4)
            .map(|d| d.max())
            .map_err(|e| err(&e))
    });
    rows.check("brownian_square", tol.exact, || {
        brownian_square_defect(space.as_ref().map_err(err)?).map_err(|e| err(&e))
    });
    rows.check("ito_isometry", tol.ito, || {
        ito_isometry_defect(space.as_ref().map_err(err)?, &mut cell_rng(seed, n, m, 2))
            .map_err(|e| err(&e))
    });
    rows.check("martingale_repr", tol.exact, || {
        martingale_defect(space.as_ref().map_err(err)?, &mut cell_rng(seed, n, m, 3))
            .map_err(|e| err(&e))
    });

    let spec = random_problem(n, m, seed, cfg.structure, &cfg.scales).map_err(|e| err(&e));
    if cfg.structure == Structure::Strict {
        rows.check("range_defect", tol.exact, || {
            let spec = spec.as_ref().map_err(Clone::clone)?;
            let mut worst = 0.0f64;
            for k in 0..n {
                let lo = 1usize << k;
                for op in [&spec.coeffs.a[k], &spec.coeffs.c[k]] {
                    let tail = op.matrix().slice(ndarray::s![lo.., ..]).to_owned();
                    worst = worst.max(crate::linalg::fro_norm(&tail));
                }
            }
            Ok(worst)
        });
    }
    let solved = spec.and_then(|s| solve(s, cfg));
    let s = solved.as_ref().map_err(Clone::clone);
    let dt = cfg.scales.horizon / n as f64;

    rows.check("positivity", tol.positivity, || {
        let s = s.clone()?;
        Ok((-positivity_scan(&s.path.p, -tol.positivity).worst()).max(0.0))
    });
    rows.check("gain_positivity", tol.positivity, || {
        let s = s.clone()?;
        Ok((-s
            .gains
            .min_eig_k
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min))
        .max(0.0))
    });
    rows.check("second_order", tol.positivity, || {
        let s = s.clone()?;
        let phi = lyapunov_adjoint(&s.spec.coeffs, &s.spec.weights, &s.spec.grid, cfg.substeps)
            .map_err(|e| err(&e))?;
        Ok((-phi
            .second_order_min_eig
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min))
        .max(0.0))
    });
    rows.check("value_function", tol.value_c * dt, || {
        let s = s.clone()?;
        Ok((s.closed - value(&s.path, &s.spec.eta)).abs())
    });
    rows.check("scaling_covariance", tol.scaling, || {
        let s = s.clone()?;
        let alpha = C64::new(1.7, -0.4);
        let scaled = s.spec.with_eta(s.spec.eta.scale(alpha));
        let j = synthesize_and_simulate(&scaled, &s.gains)
            .map_err(|e| err(&e))?
            .cost
            .total;
        let v = value(&s.path, &scaled.eta);
        let a2 = alpha.norm_sqr();
        let base_v = value(&s.path, &s.spec.eta);
        let rel = |x: f64, y: f64| (x - a2 * y).abs() / (a2 * y.abs()).max(f64::MIN_POSITIVE);
        Ok(rel(j, s.closed).max(rel(v, base_v)))
    });

    let qp = s
        .clone()
        .and_then(|s| open_loop_qp(&s.spec).map_err(|e| err(&e)));
    let qpr = qp.as_ref().map_err(Clone::clone);
    let slack = |j: f64| tol.rounding * j.abs().max(1.0);
    rows.check(
        "qp_lower",
        slack(s.as_ref().map(|s| s.closed).unwrap_or(1.0)),
        || {
            let (s, qp) = (s.clone()?, qpr.clone()?);
            Ok((qp.j - s.closed).max(0.0))
        },
    );
    rows.check("qp_upper", tol.qp_gap_c * dt, || {
        let (s, qp) = (s.clone()?, qpr.clone()?);
        Ok(s.closed - qp.j)
    });
    let samples: Vec<Vec<Vect>> = {
        let mut rng = cell_rng(seed, n, m, 4);
        (0..cfg.samples)
            .map(|_| random_controls(&mut rng, n, m, 1.0))
            .collect()
    };
    rows.check(
        "qp_convexity",
        slack(qpr.as_ref().map(|q| q.j).unwrap_or(1.0)),
        || {
            let (s, qp) = (s.clone()?, qpr.clone()?);
            let mut worst = 0.0f64;
            for u in &samples {
                let j = cost(&s.spec, u).map_err(|e| err(&e))?.total;
                worst = worst.max(qp.j - j);
            }
            Ok(worst)
        },
    );
    let completions = s.clone().and_then(|s| {
        samples
            .iter()
            .take(cfg.samples.min(10))
            .map(|u| completion_of_squares(&s.spec, &s.gains, s.closed, u).map_err(|e| err(&e)))
            .collect::<std::result::Result<Vec<_>, String>>()
    });
    rows.check("completion_of_squares", tol.completion_c * dt, || {
        Ok(completions
            .clone()?
            .iter()
            .map(|r| r.residual)
            .fold(0.0, f64::max))
    });
    rows.check("uniqueness_probe", tol.completion_c * dt, || {
        let s = s.clone()?;
        let kappa = s
            .gains
            .min_eig_k
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        Ok(completions
            .clone()?
            .iter()
            .map(|r| (0.5 * kappa * r.deviation - r.gap).max(0.0))
            .fold(0.0, f64::max))
    });
    rows.check("stationarity", tol.stationarity_c * dt, || {
        let (s, qp) = (s.clone()?, qpr.clone()?);
        let x =
            solve_forward(&s.spec.eta, &qp.u, &s.spec.coeffs, &s.spec.grid).map_err(|e| err(&e))?;
        stationarity_residual(&s.spec, &qp.u, &x).map_err(|e| err(&e))
    });
    let trials: Vec<Vec<Vect>> = samples.iter().take(3).cloned().collect();
    rows.check("convex_variation", tol.variation_c * dt, || {
        let (s, qp) = (s.clone()?, qpr.clone()?);
        let mode = VariationMode::Convex {
            epsilons: vec![1.0, 0.5, 0.1, 0.01],
        };
        let r = variation_checks(&s.spec, &qp.u, &mode, &trials).map_err(|e| err(&e))?;
        Ok((-r.worst).max(0.0))
    });
    rows.check("spike_variation", tol.variation_c * dt, || {
        let (s, qp) = (s.clone()?, qpr.clone()?);
        let mode = VariationMode::Spike { widths: vec![1, 2] };
        let r = variation_checks(&s.spec, &qp.u, &mode, &trials).map_err(|e| err(&e))?;
        Ok((-r.worst).max(0.0))
    });

    let recon = s.clone().and_then(|s| {
        [0, n / 2]
            .iter()
            .map(|&k0| flow_reconstruct_p(&s.spec, &s.path, &s.gains, k0).map_err(|e| err(&e)))
            .collect::<std::result::Result<Vec<_>, String>>()
    });
    type Pick = fn(&crate::lq::Reconstruction) -> &Vec<f64>;
    let flow_checks: [(&str, f64, Pick); 5] = [
        ("flow_duality", tol.duality_c, |r| &r.duality),
        ("flow_p_error", tol.p_error_c, |r| &r.p_error),
        ("flow_hermitian", tol.hermitian_c, |r| &r.hermitian_defect),
        ("flow_gain_residual", tol.gain_residual_c, |r| {
            &r.residual_gain
        }),
        ("flow_pi_residual", tol.pi_residual_c, |r| &r.residual_pi),
    ];
    for (name, cst, pick) in flow_checks {
        rows.check(name, cst * dt, || {
            Ok(recon
                .clone()?
                .iter()
                .map(|r| pick(r).iter().copied().fold(0.0, f64::max))
                .fold(0.0, f64::max))
        });
    }
    rows.check("weak_solution", tol.weak_c * dt, || {
        let s = s.clone()?;
        let mut rng = cell_rng(seed, n, m, 5);
        let mut worst = 0.0f64;
        for t in [0, n / 2] {
            let probes = random_probes(&s.spec, t, &mut rng);
            let r = weak_solution_residual(
                &s.path,
                &probes,
                &s.spec.coeffs,
                &s.spec.weights,
                &s.spec.grid,
                t,
                cfg.policy,
            )
            .map_err(|e| err(&e))?;
            worst = worst.max(r);
        }
        Ok(worst)
    });
    let galerkin = s.clone().and_then(|s| {
        let k0 = n / 2;
        let datum = random_adapted(&mut cell_rng(seed, n, m, 6), s.spec.dim(), k0);
        galerkin_truncate(
            &s.gains.theta,
            &s.spec.coeffs,
            &s.spec.weights.m,
            &s.spec.weights.g,
            &s.spec.grid,
            k0,
            &datum,
            1,
        )
        .map_err(|e| err(&e))
    });
    rows.check("galerkin_monotone", tol.exact, || {
        Ok(galerkin
            .clone()?
            .operator_curves
            .iter()
            .map(|c| c.max_increase())
            .fold(0.0, f64::max))
    });
    rows.check("galerkin_endpoint", tol.exact, || {
        let g = galerkin.clone()?;
        Ok(g.operator_curves
            .iter()
            .chain(&g.datum_curves)
            .map(|c| c.final_error())
            .fold(0.0, f64::max))
    });
    rows.out
}

/// Ladder rows. A failed study yields one failed `ladder` row.
pub fn ladder_checks(cfg: &SuiteConfig) -> Vec<CheckResult> {
    let tol = &cfg.tolerances;
    let study = catch_unwind(AssertUnwindSafe(|| {
        convergence_study(
            &cfg.family,
            cfg.ladder_start,
            cfg.halvings,
            cfg.substeps,
            cfg.policy,
        )
    }));
    match study {
        Ok(Ok(table)) => ladder_results(&table, cfg),
        _ => vec![CheckResult::failed(
            "ladder",
            ladder_fingerprint(cfg),
            tol.order_min,
        )],
    }
}

fn ladder_fingerprint(cfg: &SuiteConfig) -> (usize, usize, u64) {
    let finest = cfg
        .ladder_start
        .checked_shl(cfg.halvings as u32)
        .unwrap_or(usize::MAX);
    (
        finest,
        1usize.checked_shl(finest as u32).unwrap_or(0),
        cfg.seed,
    )
}

/// Rows for an already computed order table. The scalar family has
/// `m = 2^N`; rows carry the fingerprint of the finest rung.
pub fn ladder_results(table: &OrderTable, cfg: &SuiteConfig) -> Vec<CheckResult> {
    let tol = &cfg.tolerances;
    let fp = ladder_fingerprint(cfg);
    let dt = table.points.last().map(|p| p.dt).unwrap_or(f64::NAN);
    let mut out = Vec::new();
    let rows: [(&str, &str, f64); 9] = [
        ("ladder_value", "value", tol.value_c),
        ("ladder_completion", "completion", tol.completion_c),
        ("ladder_stationarity", "stationarity", tol.stationarity_c),
        ("ladder_duality", "duality", tol.duality_c),
        ("ladder_p_error", "p_error", tol.p_error_c),
        ("ladder_hermitian", "hermitian", tol.hermitian_c),
        ("ladder_gain_residual", "gain_residual", tol.gain_residual_c),
        ("ladder_pi_residual", "pi_residual", tol.pi_residual_c),
        ("ladder_weak", "weak", tol.weak_c),
    ];
    for (name, quantity, cst) in rows {
        out.push(order_result(
            name,
            table,
            quantity,
            cst * dt,
            tol.order_min,
            fp,
        ));
    }
    let reduction = table
        .points
        .iter()
        .map(|p| p.riccati_reduction.max(p.lyapunov_reduction))
        .fold(0.0, f64::max);
    out.push(CheckResult::bound(
        "scalar_oracle",
        fp,
        reduction,
        tol.oracle,
    ));
    let continuum = table
        .points
        .last()
        .map(|p| p.riccati_continuum)
        .unwrap_or(f64::INFINITY);
    out.push(CheckResult::bound(
        "scalar_oracle_continuum",
        fp,
        continuum,
        tol.oracle,
    ));
    let (n0, m0) = (cfg.ladder_start, 1usize << cfg.ladder_start);
    out.push(order_result(
        "rk4_order",
        table,
        "rk4_substeps",
        tol.oracle,
        tol.rk4_order_min,
        (n0, m0, cfg.seed),
    ));
    out
}

fn order_result(
    name: &str,
    table: &OrderTable,
    quantity: &str,
    tolerance: f64,
    order_min: f64,
    fp: (usize, usize, u64),
) -> CheckResult {
    match table.row(quantity) {
        Some(row) => {
            let mut r = CheckResult::bound(name, fp, row.finest(), tolerance);
            r.order = Some(row.order);
            r.pass = r.pass && row.order >= order_min;
            r
        }
        None => CheckResult::failed(name, fp, tolerance),
    }
}

/// Problem seeds of one cell.
pub fn problem_seeds(cfg: &SuiteConfig) -> Vec<u64> {
    (0..cfg.problems as u64)
        .map(|i| cfg.seed.wrapping_add(i))
        .collect()
}

/// Runs every cell and the ladder. Rows come out in `(N, m, seed)` order
/// followed by the ladder rows, independent of scheduling.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<CheckResult>, QslqError> {
    cfg.validate()?;
    let mut cells = Vec::new();
    let mut modes = cfg.modes.clone();
    modes.sort_unstable();
    modes.dedup();
    let mut controls = cfg.controls.clone();
    controls.sort_unstable();
    controls.dedup();
    for &n in &modes {
        for &m in &controls {
            for seed in problem_seeds(cfg) {
                cells.push((n, m, seed));
            }
        }
    }
    let mut out: Vec<CheckResult> = cells
        .par_iter()
        .map(|&(n, m, seed)| problem_checks(cfg, n, m, seed))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    out.extend(ladder_checks(cfg));
    Ok(out)
}
