//! C interface to `exit-moments`.
//!
//! Every entry point returns an [`EmStatus`]. On failure a message is kept
//! per thread and can be read with [`em_last_error_message`]. Handles are
//! opaque and owned by the caller, who releases them with the matching
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use exit_moments::bounds::{build_report, BoundReport};
use exit_moments::montecarlo::{simulate_exit_moments, ExitRule, McConfig};
use exit_moments::{
    assemble_laplacian, build_grid, full_spectrum, smallest_eigenpairs, solve_hierarchy, DomainSpec, Error,
    HierarchySolution, SparseOperator, SpectralData,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidSpec = 3,
    GridTooCoarse = 4,
    Parse = 5,
    NotConverged = 6,
    Numerical = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmExitRule {
    Discrete = 0,
    BrownianBridge = 1,
}

/// One row of the bound report.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EmBoundRow {
    pub k: usize,
    pub upper_polya: f64,
    pub upper_ratio: f64,
    pub upper_variance: f64,
    pub lower_moment: f64,
    pub lower_variance: f64,
    pub reference_lambda1: f64,
    pub polya_functional: f64,
}

impl From<&BoundReport> for EmBoundRow {
    fn from(r: &BoundReport) -> Self {
        EmBoundRow {
            k: r.k,
            upper_polya: r.upper_polya,
            upper_ratio: r.upper_ratio,
            upper_variance: r.upper_variance,
            lower_moment: r.lower_moment,
            lower_variance: r.lower_variance,
            reference_lambda1: r.reference_lambda1,
            polya_functional: r.polya_functional,
        }
    }
}

/// Discrete operator handle.
pub struct EmOperator(SparseOperator);

/// Solved moment hierarchy handle.
pub struct EmHierarchy(HierarchySolution);

struct Failure(EmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidSpec(_) => EmStatus::InvalidSpec,
            Error::GridTooCoarse(_) => EmStatus::GridTooCoarse,
            Error::Parse(_) => EmStatus::Parse,
            Error::Io(_) => EmStatus::Io,
            Error::MaxIterationsExceeded { .. } | Error::ConvergenceFailure { .. } | Error::HierarchySolve { .. } => {
                EmStatus::NotConverged
            }
            e if e.is_numerical() => EmStatus::Numerical,
            _ => EmStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(EmStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(EmStatus::InvalidArgument, msg.into())
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> EmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            EmStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            EmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn principal(op: &SparseOperator) -> Result<SpectralData, Error> {
    if op.order() < 2 {
        full_spectrum(op)
    } else {
        smallest_eigenpairs(op, 1)
    }
}

/// Message for the last failed call on this thread, or null after a
/// successful call. Valid until the next call into this library.
#[no_mangle]
pub extern "C" fn em_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Nodal Laplacian on a domain such as `"disk:1"` or `"rect:1x2"` with
/// spacing `h`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn em_operator_from_domain(spec: *const c_char, h: f64, out: *mut *mut EmOperator) -> EmStatus {
    guard(|| {
        let spec: DomainSpec = str_arg(spec, "spec")?.parse()?;
        let grid = build_grid(&spec, h)?;
        put(out, EmOperator(assemble_laplacian(&grid)))
    })
}

/// Operator from a dense row-major `n × n` symmetric positive definite
/// matrix with quadrature weight `cell_measure`. Only the upper triangle
/// is read.
///
/// # Safety
/// `values` must point to `n * n` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn em_operator_from_dense(
    values: *const f64,
    n: usize,
    cell_measure: f64,
    out: *mut *mut EmOperator,
) -> EmStatus {
    guard(|| {
        let len = n.checked_mul(n).ok_or_else(|| invalid("matrix order overflows"))?;
        let flat = slice_arg(values, len, "values")?;
        let rows: Vec<Vec<f64>> = flat.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        put(out, EmOperator(SparseOperator::from_dense(&rows, cell_measure)?))
    })
}

/// Number of unknowns, or 0 for a null handle.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn em_operator_order(op: *const EmOperator) -> usize {
    op.as_ref().map_or(0, |op| op.0.order())
}

/// Quadrature volume `cell_measure · n`, or NaN for a null handle.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn em_operator_volume(op: *const EmOperator) -> f64 {
    op.as_ref().map_or(f64::NAN, |op| op.0.volume())
}

/// # Safety
/// `op` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn em_operator_free(op: *mut EmOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Solves the hierarchy to `order` levels at relative tolerance `tol`.
///
/// # Safety
/// `op` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn em_hierarchy_solve(
    op: *const EmOperator,
    order: usize,
    tol: f64,
    out: *mut *mut EmHierarchy,
) -> EmStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("op"))?;
        put(out, EmHierarchy(solve_hierarchy(&op.0, order, tol)?))
    })
}

/// # Safety
/// `hier` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn em_hierarchy_depth(hier: *const EmHierarchy) -> usize {
    hier.as_ref().map_or(0, |h| h.0.depth())
}

/// Writes `T_1..=T_len` into `out`.
///
/// # Safety
/// `hier` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn em_hierarchy_moments(hier: *const EmHierarchy, out: *mut f64, len: usize) -> EmStatus {
    guard(|| {
        let hier = &hier.as_ref().ok_or_else(|| null("hier"))?.0;
        if len > hier.depth() {
            return Err(invalid(format!("requested {len} moments, hierarchy depth is {}", hier.depth())));
        }
        let out = slice_out(out, len, "out")?;
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = hier.t(k + 1).expect("k <= depth");
        }
        Ok(())
    })
}

/// # Safety
/// `hier` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn em_hierarchy_free(hier: *mut EmHierarchy) {
    if !hier.is_null() {
        drop(Box::from_raw(hier));
    }
}

/// Smallest eigenvalue and the projected mass of its eigenspace.
///
/// # Safety
/// `op` must be a live handle; `lambda1` and `a_sq` must be valid.
#[no_mangle]
pub unsafe extern "C" fn em_principal_eigenpair(op: *const EmOperator, lambda1: *mut f64, a_sq: *mut f64) -> EmStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("op"))?;
        if lambda1.is_null() || a_sq.is_null() {
            return Err(null("output"));
        }
        let data = principal(&op.0)?;
        *lambda1 = data.lambda[0];
        *a_sq = data.cluster_masses()[0].1;
        Ok(())
    })
}

/// Bound rows for `k = 1..=k_max`, written to `rows`. The hierarchy must
/// have depth at least `2·k_max`. A non-positive `volume` selects the
/// operator's quadrature volume.
///
/// # Safety
/// Handles must be live and `rows` must hold `k_max` entries.
#[no_mangle]
pub unsafe extern "C" fn em_bounds(
    op: *const EmOperator,
    hier: *const EmHierarchy,
    k_max: usize,
    volume: f64,
    rows: *mut EmBoundRow,
) -> EmStatus {
    guard(|| {
        let op = &op.as_ref().ok_or_else(|| null("op"))?.0;
        let hier = &hier.as_ref().ok_or_else(|| null("hier"))?.0;
        if hier.u(1).is_some_and(|u| u.len() != op.order()) {
            return Err(invalid("hierarchy was solved for a different operator"));
        }
        let volume = if volume > 0.0 { volume } else { op.volume() };
        let report = build_report(hier, &principal(op)?, volume, k_max)?;
        let out = slice_out(rows, k_max, "rows")?;
        for (slot, row) in out.iter_mut().zip(&report) {
            *slot = row.into();
        }
        Ok(())
    })
}

/// Monte Carlo estimates of `E^{x0}[τ^k]`, `k = 1..=k_max`, written to
/// `means` and `std_errors`. Runs are reproducible for a fixed `seed`.
///
/// # Safety
/// `spec` must be a NUL-terminated string, `x0` must hold `dim` doubles and
/// both outputs must hold `k_max` doubles.
#[no_mangle]
pub unsafe extern "C" fn em_mc_exit_moments(
    spec: *const c_char,
    x0: *const f64,
    dim: usize,
    k_max: usize,
    dt: f64,
    n_paths: usize,
    seed: u64,
    rule: EmExitRule,
    means: *mut f64,
    std_errors: *mut f64,
) -> EmStatus {
    guard(|| {
        let spec: DomainSpec = str_arg(spec, "spec")?.parse()?;
        let x0 = slice_arg(x0, dim, "x0")?;
        let rule = match rule {
            EmExitRule::Discrete => ExitRule::Discrete,
            EmExitRule::BrownianBridge => ExitRule::BrownianBridge,
        };
        let cfg = McConfig::new(dt, n_paths, seed).with_exit_rule(rule);
        let est = simulate_exit_moments(&spec, x0, k_max, &cfg)?;
        let means = slice_out(means, k_max, "means")?;
        let ses = slice_out(std_errors, k_max, "std_errors")?;
        for ((e, m), s) in est.iter().zip(means.iter_mut()).zip(ses.iter_mut()) {
            *m = e.mean;
            *s = e.std_error;
        }
        Ok(())
    })
}
