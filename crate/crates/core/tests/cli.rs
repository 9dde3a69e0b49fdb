use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qslq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qslq"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const SIMULATE: &str = r#"{"command": "simulate", "problem": {"kind": "random", "modes": 3, "controls": 2, "seed": 4}, "out": "out"}"#;

const SMALL_VERIFY: &str = r#"{
  "command": "verify",
  "seed": 11,
  "modes": [3, 4],
  "controls": [1, 2],
  "problems": 2,
  "samples": 10,
  "ladder_start": 2,
  "halvings": 1
}"#;

#[test]
fn passing_run_exits_zero_and_writes_everything() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "run.json", SIMULATE);
    let out = qslq(tmp.path(), &["--config", "run.json", "--format", "both"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = tmp.path().join("out");
    for f in [
        "manifest.json",
        "results.csv",
        "results.json",
        "state_path.json",
    ] {
        assert!(dir.join(f).exists(), "missing {f}");
    }
    let csv = std::fs::read_to_string(dir.join("results.csv")).unwrap();
    assert!(csv.starts_with("check,N,m,seed,measured,tolerance,order,pass\n"));
    let json = std::fs::read_to_string(dir.join("results.json")).unwrap();
    let rows = qslq::cli::parse_json(&json).unwrap();
    assert_eq!(rows.len(), csv.lines().count() - 1);
    assert!(rows.iter().all(|r| r.pass && r.seed == 4));
    let m = manifest(&dir);
    assert_eq!(m["status"], "passed");
    assert_eq!(m["failed"], false);
}

#[test]
fn failing_check_exits_one_with_failed_marker() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "run.json", SIMULATE);
    let out = qslq(
        tmp.path(),
        &["--config", "run.json", "--tol-value_c", "1e-12"],
    );
    assert_eq!(out.status.code(), Some(1));
    let dir = tmp.path().join("out");
    let csv = std::fs::read_to_string(dir.join("results.csv")).unwrap();
    assert!(csv
        .lines()
        .any(|l| l.starts_with("value_function,") && l.ends_with(",false")));
    let m = manifest(&dir);
    assert_eq!(m["failed"], true);
    assert_eq!(m["config"]["tolerances"]["value_c"], 1e-12);
}

#[test]
fn config_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        (
            "dup.json",
            r#"{"command": "verify", "seed": 1, "seed": 2}"#,
            "duplicate field `seed`",
        ),
        (
            "unknown.json",
            "{\n\"command\": \"verify\",\n\"substep\": 4}",
            "substep",
        ),
        ("broken.json", r#"{"command": "verify", "#, "line 1"),
        (
            "range.json",
            r#"{"command": "verify", "substeps": 0}"#,
            "substeps",
        ),
        (
            "budget.json",
            r#"{"command": "verify", "modes": [12]}"#,
            "modes",
        ),
        ("nospec.json", r#"{"command": "simulate"}"#, "problem"),
    ];
    for (name, text, needle) in cases {
        write(tmp.path(), name, text);
        let out = qslq(tmp.path(), &["--config", name]);
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(2), "{name}: {err}");
        assert!(err.contains(needle), "{name}: {err}");
    }
    let out = qslq(tmp.path(), &["--command", "verify", "--tol-nonsense", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = qslq(tmp.path(), &["--command", "frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = qslq(tmp.path(), &["--config", "missing.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sink_failure_exits_one() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "run.json", SIMULATE);
    // A directory where the report should go makes the write fail.
    std::fs::create_dir_all(tmp.path().join("out/results.csv")).unwrap();
    let out = qslq(tmp.path(), &["--config", "run.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("results.csv"));
    assert_eq!(manifest(&tmp.path().join("out"))["failed"], true);
}

#[test]
fn flags_override_the_file_and_reach_the_manifest() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "run.json",
        r#"{"command": "solve-riccati", "substeps": 4, "seed": 1, "problem": {"kind": "scalar-family", "modes": 3}}"#,
    );
    let out = qslq(
        tmp.path(),
        &[
            "--config",
            "run.json",
            "--substeps=8",
            "--seed",
            "5",
            "--out",
            "o",
            "--parallel",
            "2",
            "--tol-oracle",
            "1e-6",
        ],
    );
    assert!(out.status.code().is_some());
    let m = manifest(&tmp.path().join("o"));
    assert_eq!(m["config"]["substeps"], 8);
    assert_eq!(m["config"]["seed"], 5);
    assert_eq!(m["config"]["parallel"], 2);
    assert_eq!(m["parallelism"], 2);
    assert_eq!(m["config"]["tolerances"]["oracle"], 1e-6);
    assert_eq!(m["rng"]["algorithm"], "ChaCha8");
    for key in [
        "modes",
        "controls",
        "policy",
        "tolerances",
        "problems",
        "structure",
        "family",
    ] {
        assert!(m["config"].get(key).is_some(), "manifest lacks {key}");
    }
}

#[test]
fn solve_riccati_on_the_scalar_family_matches_the_oracle() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "run.json",
        r#"{"command": "solve-riccati", "problem": {"kind": "scalar-family", "modes": 8}, "out": "o"}"#,
    );
    let out = qslq(tmp.path(), &["--config", "run.json"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let path: Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("o/riccati_path.json")).unwrap(),
    )
    .unwrap();
    let nodes = path.as_array().unwrap();
    assert_eq!(nodes.len(), 9);
    let fine = qslq::verify::reduced_riccati_path(&Default::default(), 8, None);
    // P_0 on the vacuum is the scalar Riccati solution at t = 0.
    let p00 = nodes[0]["P"][0][0][0].as_f64().unwrap();
    assert!((p00 - fine[0][0]).abs() <= 1e-8);
}

#[test]
fn dense_spec_file_is_accepted() {
    use qslq::cli::{DenseProblem, ProblemSource};
    let tmp = TempDir::new().unwrap();
    let spec = qslq::verify::ScalarFamily::default().problem(3).unwrap();
    let dense =
        serde_json::to_string(&ProblemSource::Dense(DenseProblem::from_spec(&spec))).unwrap();
    write(tmp.path(), "problem.json", &dense);
    write(
        tmp.path(),
        "run.json",
        r#"{"command": "simulate", "spec": "problem.json", "out": "o"}"#,
    );
    let out = qslq(tmp.path(), &["--config", "run.json"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn converge_writes_an_order_table() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "run.json",
        r#"{"command": "converge", "ladder_start": 2, "halvings": 1, "out": "o"}"#,
    );
    let out = qslq(tmp.path(), &["--config", "run.json"]);
    assert!(matches!(out.status.code(), Some(0 | 1)));
    let table = std::fs::read_to_string(tmp.path().join("o/orders.csv")).unwrap();
    assert!(table.starts_with("quantity,N,step,error,order\n"));
    assert!(table.lines().any(|l| l.starts_with("value,4,")));
    assert!(table.lines().any(|l| l.starts_with("rk4_substeps,2,")));
}

#[test]
fn verify_output_is_independent_of_parallelism() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "run.json", SMALL_VERIFY);
    let a = qslq(
        tmp.path(),
        &["--config", "run.json", "--parallel", "1", "--out", "a"],
    );
    let b = qslq(
        tmp.path(),
        &["--config", "run.json", "--parallel", "4", "--out", "b"],
    );
    assert_eq!(a.status.code(), b.status.code());
    let ra = std::fs::read(tmp.path().join("a/results.csv")).unwrap();
    let rb = std::fs::read(tmp.path().join("b/results.csv")).unwrap();
    assert!(!ra.is_empty());
    assert_eq!(ra, rb);
}

#[test]
fn help_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let out = qslq(tmp.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("--config"));
}
