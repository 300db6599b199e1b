//! C ABI over the riemfoa solvers.
//!
//! Every function returns an [`RfStatus`]. Results come back through out
//! pointers; objects are opaque handles released with the matching `*_free`.
//! After a non-OK status, [`rf_last_error`] describes the failure on the
//! calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use riemfoa::cluster::{clustering_error, spectral_cluster};
use riemfoa::linalg::{dense_from_row_major, thin_svd, to_row_major, truncate_rank};
use riemfoa::lrr::{sp_rprg_alm, AlmConfig, LrrProblem};
use riemfoa::problems::{generate_completion, CompletionInstance, CompletionProblem};
use riemfoa::prox::{shrink_columns, svt, ShrinkThreshold};
use riemfoa::solver::{baseline_solve, foa_solve, BaselineMethod, SolverConfig};
use riemfoa::{DenseMatrix, FoaError};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RfStatus {
    Ok = 0,
    NullPointer = 1,
    ShapeMismatch = 2,
    InvalidArgument = 3,
    NonFinite = 4,
    Numerical = 5,
    Solver = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RfSolver {
    Foa = 0,
    FoaNoMomentum = 1,
    SteepestDescent = 2,
    ConjugateGradient = 3,
}

/// Dense real matrix.
pub struct RfMatrix {
    inner: DenseMatrix,
}

/// Synthetic matrix-completion instance.
pub struct RfCompletion {
    inner: CompletionInstance,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &FoaError) -> RfStatus {
    match err.root() {
        FoaError::NonFinite(_) | FoaError::NonFiniteObjective { .. } => RfStatus::NonFinite,
        FoaError::ShapeMismatch { .. } => RfStatus::ShapeMismatch,
        FoaError::InvalidParameter(_) | FoaError::Infeasible(_) | FoaError::Parse(_) => RfStatus::InvalidArgument,
        FoaError::SvdFailure { .. } => RfStatus::Numerical,
        FoaError::Backtracking { .. } | FoaError::LineSearch { .. } => RfStatus::Solver,
        FoaError::Io(_) | FoaError::Json(_) => RfStatus::Io,
        FoaError::Context { .. } => RfStatus::Solver,
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), (RfStatus, String)>>(f: F) -> RfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RfStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            RfStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (RfStatus, String)>;
}

impl<T> IntoFfi<T> for riemfoa::Result<T> {
    fn ffi(self) -> Result<T, (RfStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (RfStatus, String) {
    (RfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn matrix_ref<'a>(m: *const RfMatrix, what: &str) -> Result<&'a DenseMatrix, (RfStatus, String)> {
    // SAFETY: caller passes either null or a live handle from this library.
    unsafe { m.as_ref() }.map(|m| &m.inner).ok_or_else(|| null(what))
}

unsafe fn put_matrix(out: *mut *mut RfMatrix, m: DenseMatrix) {
    // SAFETY: `out` checked non-null by the caller.
    unsafe { *out = Box::into_raw(Box::new(RfMatrix { inner: m })) };
}

/// Message for the last failure on this thread; empty after success. The
/// pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn rf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a `rows x cols` matrix from `rows * cols` row-major values.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut RfMatrix,
) -> RfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| (RfStatus::InvalidArgument, "size overflow".into()))?;
        let slice = if len == 0 {
            &[][..]
        } else if data.is_null() {
            return Err(null("data"));
        } else {
            // SAFETY: caller guarantees `len` readable values.
            unsafe { std::slice::from_raw_parts(data, len) }
        };
        let m = dense_from_row_major(rows, cols, slice).ffi()?;
        unsafe { put_matrix(out, m) };
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rf_matrix_free(m: *mut RfMatrix) {
    if !m.is_null() {
        // SAFETY: handle came from Box::into_raw in this library.
        drop(unsafe { Box::from_raw(m) });
    }
}

/// # Safety
/// `m` must be a live handle; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_matrix_shape(m: *const RfMatrix, rows: *mut usize, cols: *mut usize) -> RfStatus {
    guard(|| {
        let a = unsafe { matrix_ref(m, "matrix") }?;
        if rows.is_null() || cols.is_null() {
            return Err(null("rows/cols"));
        }
        unsafe {
            *rows = a.nrows();
            *cols = a.ncols();
        }
        Ok(())
    })
}

/// Copies the entries in row-major order into `buf`, which holds `len` doubles.
///
/// # Safety
/// `m` must be a live handle; `buf` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rf_matrix_copy(m: *const RfMatrix, buf: *mut f64, len: usize) -> RfStatus {
    guard(|| {
        let a = unsafe { matrix_ref(m, "matrix") }?;
        if len != a.len() {
            return Err((
                RfStatus::ShapeMismatch,
                format!("buffer holds {len} values, matrix has {}", a.len()),
            ));
        }
        if len == 0 {
            return Ok(());
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        let data = to_row_major(a);
        // SAFETY: caller guarantees `len` writable values.
        unsafe { ptr::copy_nonoverlapping(data.as_ptr(), buf, len) };
        Ok(())
    })
}

/// Thin SVD `A = U diag(sigma) V^T`, singular values descending; `sigma` is
/// returned as a column vector.
///
/// # Safety
/// `a` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_thin_svd(
    a: *const RfMatrix,
    u: *mut *mut RfMatrix,
    sigma: *mut *mut RfMatrix,
    v: *mut *mut RfMatrix,
) -> RfStatus {
    guard(|| {
        let a = unsafe { matrix_ref(a, "a") }?;
        if u.is_null() || sigma.is_null() || v.is_null() {
            return Err(null("out"));
        }
        let s = thin_svd(a).ffi()?;
        let sig = DenseMatrix::from_column_slice(s.len(), 1, s.sigma.as_slice());
        unsafe {
            put_matrix(u, s.u);
            put_matrix(sigma, sig);
            put_matrix(v, s.v);
        }
        Ok(())
    })
}

/// Best rank-`r` approximation of `a`.
///
/// # Safety
/// `a` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_truncate_rank(a: *const RfMatrix, r: usize, out: *mut *mut RfMatrix) -> RfStatus {
    guard(|| {
        let a = unsafe { matrix_ref(a, "a") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let t = truncate_rank(a, r).ffi()?;
        unsafe { put_matrix(out, t.to_dense()) };
        Ok(())
    })
}

/// Singular value thresholding: proximal map of `tau |.|_*`.
///
/// # Safety
/// `a` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_svt(a: *const RfMatrix, tau: f64, out: *mut *mut RfMatrix) -> RfStatus {
    guard(|| {
        let a = unsafe { matrix_ref(a, "a") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let tau = ShrinkThreshold::new(tau).ffi()?;
        let s = thin_svd(a).ffi()?;
        unsafe { put_matrix(out, svt(&s, tau).to_dense()) };
        Ok(())
    })
}

/// Column shrinkage: proximal map of `tau |.|_{2,1}`.
///
/// # Safety
/// `a` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_shrink_columns(a: *const RfMatrix, tau: f64, out: *mut *mut RfMatrix) -> RfStatus {
    guard(|| {
        let a = unsafe { matrix_ref(a, "a") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let tau = ShrinkThreshold::new(tau).ffi()?;
        unsafe { put_matrix(out, shrink_columns(a, tau)) };
        Ok(())
    })
}

/// Random rank-`r` completion instance with `round(os * r (m + n - r))`
/// observed entries.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_completion_generate(
    m: usize,
    n: usize,
    r: usize,
    os: f64,
    seed: u64,
    out: *mut *mut RfCompletion,
) -> RfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inst = generate_completion(m, n, r, os, seed).ffi()?;
        unsafe { *out = Box::into_raw(Box::new(RfCompletion { inner: inst })) };
        Ok(())
    })
}

/// # Safety
/// `inst` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rf_completion_free(inst: *mut RfCompletion) {
    if !inst.is_null() {
        // SAFETY: handle came from Box::into_raw in this library.
        drop(unsafe { Box::from_raw(inst) });
    }
}

/// Number of observed entries.
///
/// # Safety
/// `inst` must be a live handle; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_completion_len(inst: *const RfCompletion, len: *mut usize) -> RfStatus {
    guard(|| {
        let inst = unsafe { inst.as_ref() }.ok_or_else(|| null("instance"))?;
        if len.is_null() {
            return Err(null("len"));
        }
        unsafe { *len = inst.inner.observations.len() };
        Ok(())
    })
}

/// Solves the completion instance from the spectral start. Stops when the
/// relative residual on the observed entries reaches `residual_tol` (`<= 0`
/// disables) or after `max_iter` iterations. Any of `x`, `iterations`,
/// `relative_residual` may be null.
///
/// # Safety
/// `inst` must be a live handle; non-null out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn rf_completion_solve(
    inst: *const RfCompletion,
    solver: RfSolver,
    max_iter: usize,
    residual_tol: f64,
    x: *mut *mut RfMatrix,
    iterations: *mut usize,
    relative_residual: *mut f64,
) -> RfStatus {
    guard(|| {
        let inst = &unsafe { inst.as_ref() }.ok_or_else(|| null("instance"))?.inner;
        let problem = CompletionProblem::new(inst.observations.clone(), inst.rank).ffi()?;
        let x0 = inst.spectral_start().ffi()?;
        let mut cfg = SolverConfig {
            max_iter,
            record_time: false,
            ..SolverConfig::default()
        };
        if residual_tol > 0.0 {
            let t = residual_tol * inst.observations.norm();
            cfg.target_objective = Some(0.5 * t * t);
        }
        let out = match solver {
            RfSolver::Foa => foa_solve(&problem, &cfg, &x0),
            RfSolver::FoaNoMomentum => {
                cfg.momentum = false;
                foa_solve(&problem, &cfg, &x0)
            }
            RfSolver::SteepestDescent => baseline_solve(&problem, BaselineMethod::SteepestDescent, &cfg, &x0),
            RfSolver::ConjugateGradient => baseline_solve(&problem, BaselineMethod::ConjugateGradient, &cfg, &x0),
        }
        .ffi()?;
        unsafe {
            if !x.is_null() {
                put_matrix(x, out.x.to_dense());
            }
            if !iterations.is_null() {
                *iterations = out.iterations;
            }
            if !relative_residual.is_null() {
                *relative_residual = inst.observations.relative_residual(&out.x);
            }
        }
        Ok(())
    })
}

/// Low-rank representation of the columns of `d` by the rank-pursuit ALM
/// solver. `max_outer` and `max_iter` cap the outer and inner loops
/// (0 keeps the defaults). `x`, `e` and `residual` may be null.
///
/// # Safety
/// `d` must be a live handle; non-null out pointers must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn rf_lrr_solve(
    d: *const RfMatrix,
    lambda: f64,
    rho: f64,
    beta: f64,
    rank_increment: usize,
    max_outer: usize,
    max_iter: usize,
    x: *mut *mut RfMatrix,
    e: *mut *mut RfMatrix,
    residual: *mut f64,
) -> RfStatus {
    guard(|| {
        let d = unsafe { matrix_ref(d, "d") }?;
        let problem = LrrProblem::new(d.clone(), lambda, rho, beta, rank_increment).ffi()?;
        let mut cfg = AlmConfig::default();
        cfg.solver.record_time = false;
        if max_outer > 0 {
            cfg.solver.max_outer = max_outer;
        }
        if max_iter > 0 {
            cfg.solver.max_iter = max_iter;
        }
        let out = sp_rprg_alm(&problem, &cfg).ffi()?;
        unsafe {
            if !residual.is_null() {
                *residual = out.residual_norm(&problem);
            }
            if !x.is_null() {
                put_matrix(x, out.state.x.to_dense());
            }
            if !e.is_null() {
                put_matrix(e, out.state.e);
            }
        }
        Ok(())
    })
}

/// Spectral clustering of a symmetric nonnegative `n x n` affinity into
/// `c` groups; writes `n` labels.
///
/// # Safety
/// `affinity` must be a live handle; `labels` must have room for `n` values.
#[no_mangle]
pub unsafe extern "C" fn rf_spectral_cluster(
    affinity: *const RfMatrix,
    c: usize,
    seed: u64,
    labels: *mut usize,
) -> RfStatus {
    guard(|| {
        let a = unsafe { matrix_ref(affinity, "affinity") }?;
        if labels.is_null() {
            return Err(null("labels"));
        }
        let l = spectral_cluster(a, c, seed).ffi()?;
        // SAFETY: caller guarantees room for n labels.
        unsafe { ptr::copy_nonoverlapping(l.as_ptr(), labels, l.len()) };
        Ok(())
    })
}

/// Misclassification rate in percent, minimized over label matchings.
///
/// # Safety
/// `pred` and `truth` must each point to `n` readable labels; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rf_clustering_error(
    pred: *const usize,
    truth: *const usize,
    n: usize,
    out: *mut f64,
) -> RfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (p, t) = if n == 0 {
            (&[][..], &[][..])
        } else {
            if pred.is_null() || truth.is_null() {
                return Err(null("labels"));
            }
            // SAFETY: caller guarantees `n` readable labels each.
            unsafe {
                (
                    std::slice::from_raw_parts(pred, n),
                    std::slice::from_raw_parts(truth, n),
                )
            }
        };
        let err = clustering_error(p, t).ffi()?;
        unsafe { *out = err };
        Ok(())
    })
}
