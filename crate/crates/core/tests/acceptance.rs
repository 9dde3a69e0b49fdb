//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Every tolerance used here is pinned in this file. Criteria that fail are
//! reported as such; the target itself only fails when the set of failing
//! criteria differs from `KNOWN_FAILURES`, so a regression or an unexpected
//! improvement both show up.

mod common;

use std::collections::BTreeSet;
use std::process::Command;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use common::{max_abs, JordanWigner};
use qslq::lq::{synthesize_and_simulate, value};
use qslq::riccati::{integrate_riccati, InversionPolicy};
use qslq::verify::{
    algebra_defects, brownian_square_defect, cell_rng, ito_isometry_defect, martingale_defect,
    random_problem, run_suite, CheckResult, RandomScales, Structure, SuiteConfig, Tolerances,
};
use qslq::CliffordSpace;

const EXACT: f64 = 1e-12;
const ISOMETRY: f64 = 1e-10;
const ALGEBRA_LIMIT: Duration = Duration::from_secs(10);
const VALUE_LIMIT: Duration = Duration::from_secs(300);

/// Observed orders below 0.9 for the `P` reconstruction error and the weak
/// pairing residual on the N = 4..8 ladder (0.877 and 0.827).
const KNOWN_FAILURES: [u32; 2] = [10, 11];

fn tolerances() -> Tolerances {
    Tolerances {
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

struct Report {
    failed: BTreeSet<u32>,
}

impl Report {
    fn line(&mut self, id: u32, title: &str, pass: bool, detail: String) {
        println!(
            "[{}] {id:>2} {title}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            self.failed.insert(id);
        }
    }
}

/// Summary of the named suite rows: the worst row relative to its tolerance,
/// observed orders and the rows that failed.
fn rows(results: &[CheckResult], names: &[&str]) -> (bool, String) {
    let picked: Vec<&CheckResult> = results
        .iter()
        .filter(|r| names.contains(&r.check.as_str()))
        .collect();
    if picked.is_empty() {
        return (false, format!("no rows named {names:?}"));
    }
    let pass = picked.iter().all(|r| r.pass);
    let worst = picked
        .iter()
        .max_by(|a, b| (a.measured / a.tolerance).total_cmp(&(b.measured / b.tolerance)))
        .unwrap();
    let mut detail = format!(
        "{} rows, {} failing; worst {} N={} m={} seed={}: {:.3e} (tol {:.3e})",
        picked.len(),
        picked.iter().filter(|r| !r.pass).count(),
        worst.check,
        worst.modes,
        worst.m,
        worst.seed,
        worst.measured,
        worst.tolerance
    );
    let orders: Vec<String> = picked
        .iter()
        .filter_map(|r| r.order.map(|o| format!("{} {o:.3}", r.check)))
        .collect();
    if !orders.is_empty() {
        detail.push_str(&format!("; orders [{}]", orders.join(", ")));
    }
    let failing: Vec<String> = picked
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{} N={} m={} seed={}", r.check, r.modes, r.m, r.seed))
        .collect();
    if !failing.is_empty() {
        detail.push_str(&format!("; failing [{}]", failing.join(", ")));
    }
    (pass, detail)
}

fn algebra(report: &mut Report) {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for n in 1..=8 {
        let space = CliffordSpace::new(n, 1.0 / n as f64).unwrap();
        let d = algebra_defects(&space, &mut cell_rng(1, n, 0, 1), 20).unwrap();
        worst = worst.max(d.max());
    }
    let mut jw_worst = 0.0f64;
    for n in 1..=4 {
        let space = CliffordSpace::new(n, 1.0 / n as f64).unwrap();
        let jw = JordanWigner::new(n);
        for s in 0..space.dim() {
            for t in 0..space.dim() {
                let ab = space.basis(s).mul(&space.basis(t)).unwrap();
                jw_worst = jw_worst.max(max_abs(
                    &(jw.rep(&ab) - jw.monomial(s).dot(&jw.monomial(t))),
                ));
            }
        }
    }
    let took = start.elapsed();
    report.line(
        1,
        "algebra exactness",
        worst <= EXACT && jw_worst <= EXACT && took <= ALGEBRA_LIMIT,
        format!(
            "CAR/trace/parity/unit {worst:.3e}, Jordan-Wigner products {jw_worst:.3e} (tol {EXACT:e}); {:.2} s (limit {} s)",
            took.as_secs_f64(),
            ALGEBRA_LIMIT.as_secs()
        ),
    );
}

fn brownian(report: &mut Report) {
    let worst = (1..=10)
        .map(|n| brownian_square_defect(&CliffordSpace::new(n, 1.0 / n as f64).unwrap()).unwrap())
        .fold(0.0, f64::max);
    report.line(
        2,
        "W(t)^2 = t",
        worst <= EXACT,
        format!("max over N <= 10 and all nodes {worst:.3e} (tol {EXACT:e})"),
    );
}

fn isometry(report: &mut Report) {
    let space = CliffordSpace::new(8, 1.0 / 8.0).unwrap();
    let mut rng = cell_rng(3, 8, 0, 2);
    let worst = (0..100)
        .map(|_| ito_isometry_defect(&space, &mut rng).unwrap())
        .fold(0.0, f64::max);
    report.line(
        3,
        "Ito isometry",
        worst <= ISOMETRY,
        format!("100 integrands at N=8, relative defect {worst:.3e} (tol {ISOMETRY:e})"),
    );
}

fn martingale(report: &mut Report) {
    let space = CliffordSpace::new(10, 0.1).unwrap();
    let mut rng = cell_rng(4, 10, 0, 3);
    let worst = (0..100)
        .map(|_| martingale_defect(&space, &mut rng).unwrap())
        .fold(0.0, f64::max);
    report.line(
        4,
        "martingale representation",
        worst <= EXACT,
        format!("100 elements at N=10, round trip {worst:.3e} (tol {EXACT:e})"),
    );
}

fn value_function(report: &mut Report, tol: &Tolerances, suite: &[CheckResult]) {
    let start = Instant::now();
    let mut cells = Vec::new();
    for n in [4, 6, 8] {
        for m in [1, 2] {
            for seed in 0..15u64 {
                cells.push((n, m, seed));
            }
        }
    }
    let scales = RandomScales::default();
    let defects: Vec<(usize, f64)> = cells
        .par_iter()
        .map(|&(n, m, seed)| {
            let spec = random_problem(n, m, seed, Structure::Filtration, &scales).unwrap();
            let (path, gains) = integrate_riccati(
                &spec.coeffs,
                &spec.weights,
                &spec.grid,
                4,
                InversionPolicy::Strict,
            )
            .unwrap();
            let j = synthesize_and_simulate(&spec, &gains).unwrap().cost.total;
            (n, (j - value(&path, &spec.eta)).abs())
        })
        .collect();
    let took = start.elapsed();
    let mut worst_ratio = 0.0f64;
    let mut bound_pass = true;
    for &(n, d) in &defects {
        let bound = tol.value_c * scales.horizon / n as f64;
        worst_ratio = worst_ratio.max(d / bound);
        bound_pass &= d <= bound;
    }
    let (ladder_pass, ladder) = rows(suite, &["ladder_value"]);
    report.line(
        5,
        "value function",
        bound_pass && ladder_pass && took <= VALUE_LIMIT,
        format!(
            "{} problems, worst |J - V| / ({} dt) = {worst_ratio:.3}; {:.1} s (limit {} s); ladder: {ladder}",
            defects.len(),
            tol.value_c,
            took.as_secs_f64(),
            VALUE_LIMIT.as_secs()
        ),
    );
}

fn reproducibility(report: &mut Report) {
    let dir = tempfile::TempDir::new().unwrap();
    let config = r#"{"command": "verify", "seed": 3, "modes": [3, 4], "controls": [1, 2], "problems": 2, "samples": 10, "ladder_start": 2, "halvings": 1}"#;
    std::fs::write(dir.path().join("run.json"), config).unwrap();
    let run = |threads: &str, out: &str| {
        Command::new(env!("CARGO_BIN_EXE_qslq"))
            .current_dir(dir.path())
            .args(["--config", "run.json", "--parallel", threads, "--out", out])
            .output()
            .unwrap();
        std::fs::read(dir.path().join(out).join("results.csv")).unwrap_or_default()
    };
    let a = run("1", "a");
    let b = run("3", "b");
    report.line(
        14,
        "reproducibility",
        !a.is_empty() && a == b,
        format!(
            "verify with --parallel 1 and 3: {} and {} bytes, {}",
            a.len(),
            b.len(),
            if a == b { "identical" } else { "different" }
        ),
    );
}

fn main() {
    let tol = tolerances();
    let mut report = Report {
        failed: BTreeSet::new(),
    };
    let cfg = SuiteConfig {
        tolerances: tol,
        ..SuiteConfig::default()
    };
    let start = Instant::now();
    let suite = run_suite(&cfg).expect("default suite runs");
    println!(
        "default suite: N {:?}, m {:?}, {} problems per cell, {} rows in {:.1} s",
        cfg.modes,
        cfg.controls,
        cfg.problems,
        suite.len(),
        start.elapsed().as_secs_f64()
    );

    algebra(&mut report);
    brownian(&mut report);
    isometry(&mut report);
    martingale(&mut report);
    value_function(&mut report, &tol, &suite);

    let criteria: [(u32, &str, &[&str]); 8] = [
        (
            6,
            "optimality against the QP oracle",
            &["qp_lower", "qp_upper", "qp_convexity"],
        ),
        (
            7,
            "completion of squares",
            &["completion_of_squares", "ladder_completion"],
        ),
        (
            8,
            "first-order condition",
            &[
                "stationarity",
                "ladder_stationarity",
                "convex_variation",
                "spike_variation",
            ],
        ),
        (
            9,
            "second-order condition",
            &["second_order", "gain_positivity", "positivity"],
        ),
        (
            10,
            "flow identities",
            &[
                "flow_duality",
                "flow_p_error",
                "flow_gain_residual",
                "flow_pi_residual",
                "flow_hermitian",
                "ladder_duality",
                "ladder_p_error",
                "ladder_gain_residual",
                "ladder_pi_residual",
                "ladder_hermitian",
            ],
        ),
        (
            11,
            "weak-solution pairing",
            &["weak_solution", "ladder_weak"],
        ),
        (
            12,
            "Galerkin truncation",
            &["galerkin_monotone", "galerkin_endpoint"],
        ),
        (
            13,
            "scalar-reduction oracle",
            &["scalar_oracle", "scalar_oracle_continuum"],
        ),
    ];
    for (id, title, names) in criteria {
        let (pass, detail) = rows(&suite, names);
        report.line(id, title, pass, detail);
    }
    reproducibility(&mut report);

    let known: BTreeSet<u32> = KNOWN_FAILURES.into_iter().collect();
    println!("failing criteria {:?}, expected {:?}", report.failed, known);
    if report.failed != known {
        eprintln!("acceptance outcome changed");
        std::process::exit(1);
    }
}
