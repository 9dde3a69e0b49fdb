use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use qslq_ffi::*;

fn last_error() -> String {
    // SAFETY: the library always returns a valid C string.
    unsafe { CStr::from_ptr(qslq_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn scalar_family_round_trip() {
    unsafe {
        let mut problem = ptr::null_mut();
        assert_eq!(qslq_problem_scalar_family(3, &mut problem), QslqStatus::Ok);
        assert_eq!(qslq_problem_modes(problem), 3);
        assert_eq!(qslq_problem_dim(problem), 8);

        let mut riccati = ptr::null_mut();
        assert_eq!(qslq_riccati_solve(problem, 4, &mut riccati), QslqStatus::Ok);
        assert_eq!(qslq_riccati_nodes(riccati), 4);

        let mut buf = vec![0.0; 2 * 64];
        assert_eq!(
            qslq_riccati_node(riccati, 3, buf.as_mut_ptr(), buf.len()),
            QslqStatus::Ok
        );
        // Terminal condition P_N = G = I.
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(buf[2 * (i * 8 + j)], want);
                assert_eq!(buf[2 * (i * 8 + j) + 1], 0.0);
            }
        }

        let mut lo = 0.0;
        assert_eq!(qslq_riccati_min_gain_eig(riccati, &mut lo), QslqStatus::Ok);
        assert!(lo > 0.0);

        let (mut v, mut j) = (0.0, 0.0);
        assert_eq!(
            qslq_closed_loop(problem, riccati, &mut v, &mut j),
            QslqStatus::Ok
        );
        assert!(v > 0.0 && (j - v).abs() < 0.5 / 3.0);

        qslq_riccati_free(riccati);
        qslq_problem_free(problem);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut problem = ptr::null_mut();
        assert_eq!(
            qslq_problem_scalar_family(2, ptr::null_mut()),
            QslqStatus::NullPointer
        );
        assert_eq!(
            qslq_problem_scalar_family(16, &mut problem),
            QslqStatus::MemoryBudget
        );
        assert!(last_error().contains("budget"));
        assert!(problem.is_null());

        let bad = CString::new(r#"{"kind": "scalar-family", "modez": 3}"#).unwrap();
        assert_eq!(
            qslq_problem_from_json(bad.as_ptr(), &mut problem),
            QslqStatus::Parse
        );
        assert!(last_error().contains("modez"));

        assert_eq!(qslq_problem_random(3, 1, 5, &mut problem), QslqStatus::Ok);
        assert!(last_error().is_empty());
        let mut riccati = ptr::null_mut();
        assert_eq!(
            qslq_riccati_solve(problem, 0, &mut riccati),
            QslqStatus::InvalidArgument
        );
        assert_eq!(qslq_riccati_solve(problem, 2, &mut riccati), QslqStatus::Ok);
        let mut small = [0.0; 4];
        assert_eq!(
            qslq_riccati_node(riccati, 0, small.as_mut_ptr(), small.len()),
            QslqStatus::BufferTooSmall
        );
        assert_eq!(
            qslq_riccati_node(riccati, 99, small.as_mut_ptr(), small.len()),
            QslqStatus::InvalidArgument
        );

        let mut other = ptr::null_mut();
        assert_eq!(qslq_problem_scalar_family(2, &mut other), QslqStatus::Ok);
        let (mut v, mut j) = (0.0, 0.0);
        assert_eq!(
            qslq_closed_loop(other, riccati, &mut v, &mut j),
            QslqStatus::Dimension
        );

        qslq_riccati_free(riccati);
        qslq_problem_free(problem);
        qslq_problem_free(other);
        qslq_problem_free(ptr::null_mut());
        qslq_riccati_free(ptr::null_mut());
    }
}

#[test]
fn json_problem_matches_constructor() {
    unsafe {
        let text =
            CString::new(r#"{"kind": "random", "modes": 3, "controls": 2, "seed": 9}"#).unwrap();
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(
            qslq_problem_from_json(text.as_ptr(), &mut a),
            QslqStatus::Ok
        );
        assert_eq!(qslq_problem_random(3, 2, 9, &mut b), QslqStatus::Ok);
        let (mut ra, mut rb) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(qslq_riccati_solve(a, 4, &mut ra), QslqStatus::Ok);
        assert_eq!(qslq_riccati_solve(b, 4, &mut rb), QslqStatus::Ok);
        let (mut x, mut y) = (vec![0.0; 128], vec![0.0; 128]);
        qslq_riccati_node(ra, 0, x.as_mut_ptr(), x.len());
        qslq_riccati_node(rb, 0, y.as_mut_ptr(), y.len());
        assert_eq!(x, y);
        qslq_riccati_free(ra);
        qslq_riccati_free(rb);
        qslq_problem_free(a);
        qslq_problem_free(b);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(qslq_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_abi_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/qslq.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "typedef struct QslqProblem QslqProblem;",
        "typedef struct QslqRiccati QslqRiccati;",
        "QSLQ_STATUS_OK = 0",
        "qslq_riccati_solve",
        "qslq_closed_loop",
        "qslq_last_error",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    // Syntax check with the system C compiler when one is installed.
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        return;
    };
    assert!(status.success());
}
