//! The `qslq` command line: configuration, orchestration and reports.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or an
//! output cannot be written, 2 on configuration errors.

pub mod config;
pub mod problem;
pub mod report;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use serde_json::json;

pub use config::{parse_args, Command, ConfigError, Format, Parsed, RunConfig};
pub use problem::{DenseProblem, ProblemSource};
pub use report::{format_float, orders_csv, parse_json, to_csv, to_json, ReportError, CSV_COLUMNS};

use crate::lq::{synthesize_and_simulate, value, ProblemSpec};
use crate::riccati::{integrate_riccati, path_to_json, positivity_scan, GainPath, RiccatiPath};
use crate::verify::{
    convergence_study, ladder_results, reduced_riccati_path, reduction_defect, run_suite,
    CheckResult, RNG_ALGORITHM,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// What a command produced, before anything touches the disk.
#[derive(Debug, Default)]
pub struct Outcome {
    pub rows: Vec<CheckResult>,
    /// Side files as `(name, contents)`.
    pub files: Vec<(String, String)>,
    /// Set when the pipeline stopped early.
    pub error: Option<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.error.is_none() && !self.rows.is_empty() && self.rows.iter().all(|r| r.pass)
    }
}

/// Entry point of the binary.
pub fn main_with_args(args: Vec<String>) -> i32 {
    match parse_args(args) {
        Ok(Parsed::Print(text)) => {
            print!("{text}");
            EXIT_PASS
        }
        Ok(Parsed::Run(cfg)) => run_command(&cfg),
        Err(e) => {
            eprintln!("qslq: {e}");
            EXIT_CONFIG
        }
    }
}

/// Runs `cfg` on a pool of `cfg.parallel` workers and writes every output
/// from this thread.
pub fn run_command(cfg: &RunConfig) -> i32 {
    if let Err(e) = std::fs::create_dir_all(&cfg.out) {
        eprintln!("qslq: output directory {}: {e}", cfg.out.display());
        return EXIT_CONFIG;
    }
    let threads = cfg.parallel.unwrap_or(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("qslq: cannot start {threads} workers: {e}");
            return EXIT_CONFIG;
        }
    };
    let start = Instant::now();
    let outcome = pool.install(|| execute(cfg));
    let elapsed = start.elapsed().as_secs_f64();
    if let Some(e) = &outcome.error {
        eprintln!("qslq: {e}");
    }
    match write_outputs(cfg, &outcome, elapsed) {
        Ok(()) if outcome.passed() => EXIT_PASS,
        Ok(()) => {
            let failed = outcome.rows.iter().filter(|r| !r.pass).count();
            eprintln!("qslq: {failed} of {} checks failed", outcome.rows.len());
            EXIT_FAIL
        }
        Err(e) => {
            eprintln!("qslq: {e}");
            EXIT_FAIL
        }
    }
}

/// Runs the selected pipeline; panics and errors end up in `error`.
pub fn execute(cfg: &RunConfig) -> Outcome {
    let mut out = Outcome::default();
    let run = catch_unwind(AssertUnwindSafe(|| match cfg.command() {
        Command::Verify => verify(cfg, &mut out),
        Command::Converge => converge(cfg, &mut out),
        Command::SolveRiccati => solve_riccati(cfg, &mut out, false),
        Command::Simulate => solve_riccati(cfg, &mut out, true),
    }));
    match run {
        Ok(Ok(())) => {}
        Ok(Err(e)) => out.error = Some(e),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            out.error = Some(format!("panic: {msg}"));
        }
    }
    out
}

type Step = Result<(), String>;

fn verify(cfg: &RunConfig, out: &mut Outcome) -> Step {
    out.rows = run_suite(&cfg.suite()).map_err(|e| e.to_string())?;
    Ok(())
}

fn converge(cfg: &RunConfig, out: &mut Outcome) -> Step {
    let suite = cfg.suite();
    let table = convergence_study(
        &cfg.family,
        cfg.ladder_start,
        cfg.halvings,
        cfg.substeps,
        cfg.policy,
    )
    .map_err(|e| e.to_string())?;
    out.files.push((
        "orders.csv".into(),
        orders_csv(&table).map_err(|e| e.to_string())?,
    ));
    out.rows = ladder_results(&table, &suite);
    Ok(())
}

fn positivity_rows(
    cfg: &RunConfig,
    fp: (usize, usize, u64),
    path: &RiccatiPath,
    gains: &GainPath,
) -> Vec<CheckResult> {
    let tol = cfg.tolerances.positivity;
    let p_min = positivity_scan(&path.p, -tol).worst();
    let k_min = gains
        .min_eig_k
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    vec![
        CheckResult::bound("positivity", fp, (-p_min).max(0.0), tol),
        CheckResult::bound("gain_positivity", fp, (-k_min).max(0.0), tol),
    ]
}

fn solve_riccati(cfg: &RunConfig, out: &mut Outcome, simulate: bool) -> Step {
    let source = cfg.problem.as_ref().ok_or("no problem given")?;
    let spec = source.build(cfg.seed).map_err(|e| e.to_string())?;
    let fp = (
        spec.steps(),
        spec.control_dim(),
        spec_seed(source, cfg.seed),
    );
    let (path, gains) = integrate_riccati(
        &spec.coeffs,
        &spec.weights,
        &spec.grid,
        cfg.substeps,
        cfg.policy,
    )
    .map_err(|e| e.to_string())?;
    out.rows = positivity_rows(cfg, fp, &path, &gains);
    if !simulate {
        out.files.push((
            "riccati_path.json".into(),
            path_to_json(&path, &spec.grid).to_string(),
        ));
        if let ProblemSource::ScalarFamily { modes, family } = source {
            let same = reduced_riccati_path(family, *modes, Some(cfg.substeps));
            let fine = reduced_riccati_path(family, *modes, None);
            let tol = cfg.tolerances.oracle;
            out.rows.push(CheckResult::bound(
                "scalar_oracle",
                fp,
                reduction_defect(&path.p, &same),
                tol,
            ));
            out.rows.push(CheckResult::bound(
                "scalar_oracle_continuum",
                fp,
                reduction_defect(&path.p, &fine),
                tol,
            ));
        }
        return Ok(());
    }
    let run = synthesize_and_simulate(&spec, &gains).map_err(|e| e.to_string())?;
    let v = value(&path, &spec.eta);
    out.rows.push(CheckResult::bound(
        "value_function",
        fp,
        (run.cost.total - v).abs(),
        cfg.tolerances.value_c * spec.grid.dt(),
    ));
    out.files.push((
        "state_path.json".into(),
        state_json(&spec, &run, v).to_string(),
    ));
    Ok(())
}

fn spec_seed(source: &ProblemSource, run_seed: u64) -> u64 {
    match source {
        ProblemSource::Random { seed, .. } => seed.unwrap_or(run_seed),
        _ => run_seed,
    }
}

fn state_json(spec: &ProblemSpec, run: &crate::lq::ClosedLoopRun, v: f64) -> serde_json::Value {
    let nodes: Vec<serde_json::Value> = (0..=spec.steps())
        .map(|k| {
            let u = run
                .controls
                .get(k)
                .map(|u| json!(u.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()));
            json!({
                "node": k,
                "t": spec.grid.time(k),
                "x": run.state.element(k).to_json(),
                "u": u,
            })
        })
        .collect();
    json!({ "cost": run.cost, "value": v, "nodes": nodes })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), String> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| format!("writing {}: {e}", path.display()))
}

/// Side files, then the reports, then the manifest. The manifest is written
/// even when the run stopped early and then carries `"failed": true`.
pub fn write_outputs(cfg: &RunConfig, outcome: &Outcome, elapsed: f64) -> Result<(), String> {
    let dir = cfg.out.as_path();
    let mut pending: Vec<(String, Result<String, String>)> = outcome
        .files
        .iter()
        .map(|(n, c)| (n.clone(), Ok(c.clone())))
        .collect();
    if !outcome.rows.is_empty() {
        if cfg.format.csv() {
            pending.push((
                "results.csv".into(),
                to_csv(&outcome.rows).map_err(|e| e.to_string()),
            ));
        }
        if cfg.format.json() {
            pending.push((
                "results.json".into(),
                to_json(&outcome.rows).map_err(|e| e.to_string()),
            ));
        }
    }
    let mut written = Vec::new();
    let mut write_error = None;
    for (name, contents) in pending {
        match contents.and_then(|c| write_file(dir, &name, &c)) {
            Ok(()) => written.push(name),
            Err(e) => {
                write_error.get_or_insert(e);
            }
        }
    }
    let failures = outcome.rows.iter().filter(|r| !r.pass).count();
    let failed = !outcome.passed() || write_error.is_some();
    let manifest = json!({
        "status": if failed { "failed" } else { "passed" },
        "failed": failed,
        "error": outcome.error.as_ref().or(write_error.as_ref()),
        "command": cfg.command(),
        "config": cfg,
        "rng": { "algorithm": RNG_ALGORITHM, "seed": cfg.seed },
        "parallelism": cfg.parallel,
        "versions": {
            "qslq": env!("CARGO_PKG_VERSION"),
            "target": format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
        },
        "rows": outcome.rows.len(),
        "failures": failures,
        "outputs": written,
        "wall_clock_seconds": elapsed,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| e.to_string())?;
    write_file(dir, "manifest.json", &text)?;
    match write_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
