//! C interface to the complexity solvers.
//!
//! Every function returns a [`RegcxStatus`]. On failure the message is
//! available from [`regcx_last_error_message`] on the same thread. Handles
//! are opaque; each `*_new`/`*_build`/solver call that succeeds hands
//! ownership to the caller, who releases it with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::size_t;
use nalgebra::DMatrix;

use regional_complexity::complexity::{self, ComplexityScores, EciOptions, FitnessOptions};
use regional_complexity::matrix::{self, EmploymentMatrix, InputMatrix, Strategy, StrategyParams};
use regional_complexity::Error;

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegcxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ZeroTotal = 3,
    DegenerateNetwork = 4,
    DegenerateSpectrum = 5,
    Unpruned = 6,
    Numeric = 7,
    BufferTooSmall = 8,
    Panic = 9,
    Other = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegcxStrategy {
    Bm = 0,
    Rlq = 1,
    Wm = 2,
    Presence = 3,
    Cm = 4,
}

impl From<RegcxStrategy> for Strategy {
    fn from(s: RegcxStrategy) -> Self {
        match s {
            RegcxStrategy::Bm => Strategy::Bm,
            RegcxStrategy::Rlq => Strategy::Rlq,
            RegcxStrategy::Wm => Strategy::Wm,
            RegcxStrategy::Presence => Strategy::Presence,
            RegcxStrategy::Cm => Strategy::Cm,
        }
    }
}

/// Region × industry employment counts.
pub struct RegcxEmployment(EmploymentMatrix);

/// An input matrix built from employment by one strategy.
pub struct RegcxInputMatrix(InputMatrix);

/// Region and industry scores from ECI or Fitness.
pub struct RegcxScores(ComplexityScores);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RegcxStatus {
    match e {
        Error::InvalidParameter(_) | Error::UnknownStrategy(_) => RegcxStatus::InvalidArgument,
        Error::ZeroTotal => RegcxStatus::ZeroTotal,
        Error::DegenerateNetwork(_) => RegcxStatus::DegenerateNetwork,
        Error::DegenerateSpectrum(_) => RegcxStatus::DegenerateSpectrum,
        Error::Unpruned => RegcxStatus::Unpruned,
        Error::Numeric(_) => RegcxStatus::Numeric,
        _ => RegcxStatus::Other,
    }
}

fn fail(status: RegcxStatus, msg: impl Into<String>) -> RegcxStatus {
    set_error(msg.into());
    status
}

/// Run `f`, converting panics and errors into status codes.
fn guard(f: impl FnOnce() -> Result<(), RegcxStatus>) -> RegcxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RegcxStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(RegcxStatus::Panic, "internal panic"),
    }
}

fn lib<T>(r: regional_complexity::Result<T>) -> Result<T, RegcxStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), RegcxStatus> {
    if p.is_null() {
        Err(fail(RegcxStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn give<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: size_t) -> Result<(), RegcxStatus> {
    non_null(buf, "output buffer")?;
    if len < src.len() {
        return Err(fail(
            RegcxStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn regcx_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn regcx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy a row-major `n_regions × n_industries` array of employment counts.
/// Regions are coded `r0, r1, …` and industries `i0, i1, …`.
///
/// # Safety
/// `values` must point to `n_regions * n_industries` readable doubles and
/// `out` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn regcx_employment_new(
    values: *const f64,
    n_regions: size_t,
    n_industries: size_t,
    out: *mut *mut RegcxEmployment,
) -> RegcxStatus {
    guard(|| {
        non_null(values, "values")?;
        non_null(out, "out")?;
        if n_regions == 0 || n_industries == 0 {
            return Err(fail(RegcxStatus::InvalidArgument, "matrix dimensions must be positive"));
        }
        let len = n_regions
            .checked_mul(n_industries)
            .ok_or_else(|| fail(RegcxStatus::InvalidArgument, "matrix dimensions overflow"))?;
        let data = std::slice::from_raw_parts(values, len);
        let m = EmploymentMatrix {
            values: DMatrix::from_row_slice(n_regions, n_industries, data),
            regions: (0..n_regions).map(|r| format!("r{r}")).collect(),
            industries: (0..n_industries).map(|i| format!("i{i}")).collect(),
        };
        give(out, RegcxEmployment(m));
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or a pointer returned by [`regcx_employment_new`]
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn regcx_employment_free(handle: *mut RegcxEmployment) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Build an input matrix. `cutoff` is used by CM only.
///
/// # Safety
/// `employment` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn regcx_input_matrix_build(
    employment: *const RegcxEmployment,
    strategy: RegcxStrategy,
    cutoff: f64,
    out: *mut *mut RegcxInputMatrix,
) -> RegcxStatus {
    guard(|| {
        non_null(employment, "employment")?;
        non_null(out, "out")?;
        let m = lib(matrix::build_input_matrix(&(*employment).0, strategy.into(), StrategyParams { cutoff }))?;
        give(out, RegcxInputMatrix(m));
        Ok(())
    })
}

/// Drop all-zero rows and columns in place.
///
/// # Safety
/// `matrix` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn regcx_input_matrix_prune(matrix: *mut RegcxInputMatrix) -> RegcxStatus {
    guard(|| {
        non_null(matrix, "matrix")?;
        let m = &mut (*matrix).0;
        let (pruned, _) = lib(matrix::prune_empty(m.clone()))?;
        *m = pruned;
        Ok(())
    })
}

/// # Safety
/// `matrix` must be a live handle; `n_regions` and `n_industries` writable.
#[no_mangle]
pub unsafe extern "C" fn regcx_input_matrix_shape(
    matrix: *const RegcxInputMatrix,
    n_regions: *mut size_t,
    n_industries: *mut size_t,
) -> RegcxStatus {
    guard(|| {
        non_null(matrix, "matrix")?;
        non_null(n_regions, "n_regions")?;
        non_null(n_industries, "n_industries")?;
        let (r, i) = (*matrix).0.values.shape();
        *n_regions = r;
        *n_industries = i;
        Ok(())
    })
}

/// Copy the values out row-major.
///
/// # Safety
/// `matrix` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn regcx_input_matrix_values(
    matrix: *const RegcxInputMatrix,
    buf: *mut f64,
    len: size_t,
) -> RegcxStatus {
    guard(|| {
        non_null(matrix, "matrix")?;
        let v = &(*matrix).0.values;
        let row_major: Vec<f64> = v.transpose().iter().copied().collect();
        copy_out(&row_major, buf, len)
    })
}

/// # Safety
/// `handle` must be null or a live input-matrix handle.
#[no_mangle]
pub unsafe extern "C" fn regcx_input_matrix_free(handle: *mut RegcxInputMatrix) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Economic Complexity Index with default solver settings. The matrix must
/// be pruned.
///
/// # Safety
/// `matrix` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn regcx_eci(matrix: *const RegcxInputMatrix, out: *mut *mut RegcxScores) -> RegcxStatus {
    guard(|| {
        non_null(matrix, "matrix")?;
        non_null(out, "out")?;
        let s = lib(complexity::eci(&(*matrix).0.values, &EciOptions::default()))?;
        give(out, RegcxScores(s));
        Ok(())
    })
}

/// Fitness/Complexity fixed point. Zero `max_iter` or nonpositive `tol`
/// select the defaults (1000 and 1e-8).
///
/// # Safety
/// `matrix` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn regcx_fitness(
    matrix: *const RegcxInputMatrix,
    max_iter: size_t,
    tol: f64,
    out: *mut *mut RegcxScores,
) -> RegcxStatus {
    guard(|| {
        non_null(matrix, "matrix")?;
        non_null(out, "out")?;
        let mut opts = FitnessOptions::default();
        if max_iter > 0 {
            opts.max_iter = max_iter;
        }
        if tol > 0.0 {
            opts.tol = tol;
        }
        let s = lib(complexity::fitness(&(*matrix).0.values, &opts))?;
        give(out, RegcxScores(s));
        Ok(())
    })
}

/// Number of region and industry scores.
///
/// # Safety
/// `scores` must be a live handle; the length pointers writable.
#[no_mangle]
pub unsafe extern "C" fn regcx_scores_len(
    scores: *const RegcxScores,
    n_regions: *mut size_t,
    n_industries: *mut size_t,
) -> RegcxStatus {
    guard(|| {
        non_null(scores, "scores")?;
        non_null(n_regions, "n_regions")?;
        non_null(n_industries, "n_industries")?;
        *n_regions = (*scores).0.region_scores.len();
        *n_industries = (*scores).0.industry_scores.len();
        Ok(())
    })
}

/// # Safety
/// `scores` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn regcx_scores_regions(scores: *const RegcxScores, buf: *mut f64, len: size_t) -> RegcxStatus {
    guard(|| {
        non_null(scores, "scores")?;
        copy_out(&(*scores).0.region_scores, buf, len)
    })
}

/// # Safety
/// `scores` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn regcx_scores_industries(
    scores: *const RegcxScores,
    buf: *mut f64,
    len: size_t,
) -> RegcxStatus {
    guard(|| {
        non_null(scores, "scores")?;
        copy_out(&(*scores).0.industry_scores, buf, len)
    })
}

/// Iterations used and whether the solver converged (1) or hit its cap (0).
///
/// # Safety
/// `scores` must be a live handle; the output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn regcx_scores_convergence(
    scores: *const RegcxScores,
    iterations: *mut size_t,
    converged: *mut i32,
) -> RegcxStatus {
    guard(|| {
        non_null(scores, "scores")?;
        non_null(iterations, "iterations")?;
        non_null(converged, "converged")?;
        let c = (*scores).0.convergence;
        *iterations = c.iterations;
        *converged = i32::from(c.converged);
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or a live scores handle.
#[no_mangle]
pub unsafe extern "C" fn regcx_scores_free(handle: *mut RegcxScores) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}
