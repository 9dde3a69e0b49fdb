//! C ABI over the qslq solvers.
//!
//! Problems and Riccati solutions live behind opaque handles. Every call
//! returns a [`QslqStatus`]; on failure [`qslq_last_error`] describes what
//! went wrong on the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use qslq::cli::ProblemSource;
use qslq::lq::{synthesize_and_simulate, value, ProblemSpec};
use qslq::riccati::{integrate_riccati, GainPath, InversionPolicy, RiccatiPath};
use qslq::verify::{RandomScales, ScalarFamily, Structure};
use qslq::QslqError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QslqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    NotAdapted = 4,
    SingularGain = 5,
    NotHermitian = 6,
    NotPositive = 7,
    IllConditioned = 8,
    Unbounded = 9,
    MemoryBudget = 10,
    Parse = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

/// A validated LQ problem.
pub struct QslqProblem {
    spec: ProblemSpec,
}

/// Riccati path and gains of one problem.
pub struct QslqRiccati {
    path: RiccatiPath,
    gains: GainPath,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(e: &QslqError) -> QslqStatus {
    match e {
        QslqError::Dimension(_) | QslqError::FiltrationIndex { .. } => QslqStatus::Dimension,
        QslqError::NotAdapted { .. } => QslqStatus::NotAdapted,
        QslqError::SingularGain { .. } => QslqStatus::SingularGain,
        QslqError::NotHermitian { .. } => QslqStatus::NotHermitian,
        QslqError::NotPositive { .. } => QslqStatus::NotPositive,
        QslqError::IllConditioned { .. } => QslqStatus::IllConditioned,
        QslqError::Unbounded { .. } => QslqStatus::Unbounded,
        QslqError::MemoryBudget { .. } => QslqStatus::MemoryBudget,
        QslqError::Invalid(_) => QslqStatus::InvalidArgument,
    }
}

fn fail(status: QslqStatus, msg: &str) -> QslqStatus {
    set_error(msg);
    status
}

/// Runs `f`, mapping library errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), QslqStatus>) -> QslqStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QslqStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(QslqStatus::Panic, "internal panic"),
    }
}

fn lib<T>(r: qslq::Result<T>) -> Result<T, QslqStatus> {
    r.map_err(|e| fail(status_of(&e), &e.to_string()))
}

fn store<T>(out: *mut *mut T, value: T) -> Result<(), QslqStatus> {
    // SAFETY: `out` was checked for null by the caller.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn nonnull<T>(p: *const T, what: &str) -> Result<(), QslqStatus> {
    if p.is_null() {
        Err(fail(QslqStatus::NullPointer, &format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn build(source: &ProblemSource, seed: u64, out: *mut *mut QslqProblem) -> Result<(), QslqStatus> {
    let spec = lib(source.build(seed))?;
    store(out, QslqProblem { spec })
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn qslq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qslq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a problem description (`{"kind": "scalar-family" | "random" | "dense", ...}`).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qslq_problem_from_json(
    json: *const c_char,
    out: *mut *mut QslqProblem,
) -> QslqStatus {
    guard(|| {
        nonnull(json, "json")?;
        nonnull(out, "out")?;
        // SAFETY: checked non-null; the caller guarantees NUL termination.
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|_| fail(QslqStatus::Parse, "json is not UTF-8"))?;
        let source: ProblemSource =
            serde_json::from_str(text).map_err(|e| fail(QslqStatus::Parse, &e.to_string()))?;
        build(&source, 0, out)
    })
}

/// Scalar family with default parameters on `modes` steps of `[0, 1]`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qslq_problem_scalar_family(
    modes: usize,
    out: *mut *mut QslqProblem,
) -> QslqStatus {
    guard(|| {
        nonnull(out, "out")?;
        build(
            &ProblemSource::ScalarFamily {
                modes,
                family: ScalarFamily::default(),
            },
            0,
            out,
        )
    })
}

/// Random filtration-compatible PSD problem.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qslq_problem_random(
    modes: usize,
    controls: usize,
    seed: u64,
    out: *mut *mut QslqProblem,
) -> QslqStatus {
    guard(|| {
        nonnull(out, "out")?;
        build(
            &ProblemSource::Random {
                modes,
                controls,
                seed: Some(seed),
                structure: Structure::Filtration,
                scales: RandomScales::default(),
            },
            seed,
            out,
        )
    })
}

/// Number of modes (= time steps). 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qslq_problem_modes(problem: *const QslqProblem) -> usize {
    // SAFETY: the caller passes null or a live handle.
    unsafe { problem.as_ref() }.map_or(0, |p| p.spec.steps())
}

/// State dimension `2^N`. 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qslq_problem_dim(problem: *const QslqProblem) -> usize {
    // SAFETY: as above.
    unsafe { problem.as_ref() }.map_or(0, |p| p.spec.dim())
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qslq_problem_free(problem: *mut QslqProblem) {
    if !problem.is_null() {
        // SAFETY: created by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Integrates the Riccati equation with `substeps` RK4 substeps per step
/// and strict inversion of `K`.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qslq_riccati_solve(
    problem: *const QslqProblem,
    substeps: usize,
    out: *mut *mut QslqRiccati,
) -> QslqStatus {
    guard(|| {
        nonnull(problem, "problem")?;
        nonnull(out, "out")?;
        // SAFETY: checked non-null.
        let spec = &unsafe { &*problem }.spec;
        if substeps == 0 {
            return Err(fail(
                QslqStatus::InvalidArgument,
                "substeps must be at least 1",
            ));
        }
        let (path, gains) = lib(integrate_riccati(
            &spec.coeffs,
            &spec.weights,
            &spec.grid,
            substeps,
            InversionPolicy::Strict,
        ))?;
        store(out, QslqRiccati { path, gains })
    })
}

/// Number of stored nodes `N + 1`. 0 for a null handle.
///
/// # Safety
/// `riccati` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qslq_riccati_nodes(riccati: *const QslqRiccati) -> usize {
    // SAFETY: the caller passes null or a live handle.
    unsafe { riccati.as_ref() }.map_or(0, |r| r.path.p.len())
}

/// Copies `P_node` row-major as interleaved `(re, im)` pairs into `buf`,
/// which must hold `2 * dim * dim` doubles.
///
/// # Safety
/// `riccati` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn qslq_riccati_node(
    riccati: *const QslqRiccati,
    node: usize,
    buf: *mut f64,
    len: usize,
) -> QslqStatus {
    guard(|| {
        nonnull(riccati, "riccati")?;
        nonnull(buf, "buf")?;
        // SAFETY: checked non-null.
        let r = unsafe { &*riccati };
        let p = r.path.p.get(node).ok_or_else(|| {
            fail(
                QslqStatus::InvalidArgument,
                &format!(
                    "node {node} outside 0..={}",
                    r.path.p.len().saturating_sub(1)
                ),
            )
        })?;
        let need = 2 * p.len();
        if len < need {
            return Err(fail(
                QslqStatus::BufferTooSmall,
                &format!("buffer holds {len}, need {need}"),
            ));
        }
        // SAFETY: the caller guarantees `len` writable doubles.
        let dst = unsafe { std::slice::from_raw_parts_mut(buf, need) };
        for (pair, z) in dst.chunks_exact_mut(2).zip(p.iter()) {
            pair[0] = z.re;
            pair[1] = z.im;
        }
        Ok(())
    })
}

/// Smallest eigenvalue of `K` over all steps.
///
/// # Safety
/// `riccati` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qslq_riccati_min_gain_eig(
    riccati: *const QslqRiccati,
    out: *mut f64,
) -> QslqStatus {
    guard(|| {
        nonnull(riccati, "riccati")?;
        nonnull(out, "out")?;
        // SAFETY: checked non-null.
        let r = unsafe { &*riccati };
        let lo = r
            .gains
            .min_eig_k
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        // SAFETY: checked non-null.
        unsafe { *out = lo };
        Ok(())
    })
}

/// Value `1/2 Re <P_0 eta, eta>` and closed-loop cost of the feedback.
///
/// # Safety
/// Both handles must be live and belong together; `value_out` and
/// `cost_out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qslq_closed_loop(
    problem: *const QslqProblem,
    riccati: *const QslqRiccati,
    value_out: *mut f64,
    cost_out: *mut f64,
) -> QslqStatus {
    guard(|| {
        nonnull(problem, "problem")?;
        nonnull(riccati, "riccati")?;
        nonnull(value_out, "value_out")?;
        nonnull(cost_out, "cost_out")?;
        // SAFETY: checked non-null.
        let (spec, r) = unsafe { (&(*problem).spec, &*riccati) };
        if r.path.p.len() != spec.steps() + 1 || r.path.p[0].nrows() != spec.dim() {
            return Err(fail(
                QslqStatus::Dimension,
                "solution does not belong to this problem",
            ));
        }
        let run = lib(synthesize_and_simulate(spec, &r.gains))?;
        // SAFETY: checked non-null.
        unsafe {
            *value_out = value(&r.path, &spec.eta);
            *cost_out = run.cost.total;
        }
        Ok(())
    })
}

/// # Safety
/// `riccati` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qslq_riccati_free(riccati: *mut QslqRiccati) {
    if !riccati.is_null() {
        // SAFETY: created by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(riccati) });
    }
}
