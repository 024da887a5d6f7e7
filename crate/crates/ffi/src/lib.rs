//! C ABI for the conditional vine copula library.
//!
//! Conventions: every function returns a [`CondvineStatus`]; results go
//! through out-pointers; handles are opaque and must be released with
//! the matching `_free` function; the last error message is kept in
//! thread-local storage and read with [`condvine_last_error`].

use condvine::copula::{CopulaParam, Family, PairCopula, Rotation, UPair};
use condvine::dpm::PosteriorTrace;
use condvine::vine::{log_density, simulate_row, VineKind, VineParams, VineSpec};
use condvine::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

/// Status codes returned by every API function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondvineStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericError = 3,
    IoError = 4,
    McmcError = 5,
}

/// Bivariate copula families.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondvineFamily {
    Independence = 0,
    Gaussian = 1,
    Clayton = 2,
    Gumbel = 3,
    Frank = 4,
}

/// Counter-clockwise rotations; 90 and 270 are only valid for Clayton
/// and Gumbel.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondvineRotation {
    Deg0 = 0,
    Deg90 = 90,
    Deg180 = 180,
    Deg270 = 270,
}

/// Vine structure.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondvineVineKind {
    DVine = 0,
    CVine = 1,
}

/// Opaque vine specification handle.
pub struct CondvineVine {
    spec: VineSpec,
}

/// Opaque posterior trace handle.
pub struct CondvineTrace {
    trace: PosteriorTrace,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn remember(err: &Error) -> CondvineStatus {
    let status = match err {
        Error::ParameterDomain { .. }
        | Error::InvalidRotation { .. }
        | Error::Dimension(_)
        | Error::Config(_)
        | Error::Data(_) => CondvineStatus::InvalidArgument,
        Error::Numeric { .. } => CondvineStatus::NumericError,
        Error::Mcmc { .. } => CondvineStatus::McmcError,
        Error::Io { .. } | Error::Csv(_) | Error::Json(_) => CondvineStatus::IoError,
    };
    set_message(&err.to_string());
    status
}

fn set_message(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn invalid(msg: &str) -> CondvineStatus {
    set_message(msg);
    CondvineStatus::InvalidArgument
}

fn null_ptr(what: &str) -> CondvineStatus {
    set_message(&format!("null pointer: {what}"));
    CondvineStatus::NullPointer
}

fn pair(family: CondvineFamily, rotation: CondvineRotation) -> Result<PairCopula, CondvineStatus> {
    let family = match family {
        CondvineFamily::Independence => Family::Independence,
        CondvineFamily::Gaussian => Family::Gaussian,
        CondvineFamily::Clayton => Family::Clayton,
        CondvineFamily::Gumbel => Family::Gumbel,
        CondvineFamily::Frank => Family::Frank,
    };
    let rotation = match rotation {
        CondvineRotation::Deg0 => Rotation::None,
        CondvineRotation::Deg90 => Rotation::Deg90,
        CondvineRotation::Deg180 => Rotation::Deg180,
        CondvineRotation::Deg270 => Rotation::Deg270,
    };
    PairCopula::new(family, rotation).map_err(|e| remember(&e))
}

/// Copy the message of the most recent error on this thread into `buf`
/// (NUL-terminated, truncated to `len` bytes). Returns the full message
/// length in bytes, excluding the terminator. `buf` may be null to
/// query the length.
///
/// # Safety
/// `buf`, when non-null, must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn condvine_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

macro_rules! pair_scalar_op {
    ($(#[$doc:meta])* $name:ident, |$c:ident, $par:ident, $u:ident, $v:ident| $expr:expr) => {
        $(#[$doc])*
        ///
        /// # Safety
        /// `out` must be a valid writable pointer.
        #[no_mangle]
        pub unsafe extern "C" fn $name(
            family: CondvineFamily,
            rotation: CondvineRotation,
            theta: f64,
            $u: f64,
            $v: f64,
            out: *mut f64,
        ) -> CondvineStatus {
            if out.is_null() {
                return null_ptr("out");
            }
            let $c = match pair(family, rotation) {
                Ok(c) => c,
                Err(s) => return s,
            };
            let $par = CopulaParam::new(theta);
            match $expr {
                Ok(v) => {
                    *out = v;
                    CondvineStatus::Ok
                }
                Err(e) => remember(&e),
            }
        }
    };
}

pair_scalar_op!(
    /// Copula density c(u, v; theta).
    condvine_pair_density,
    |c, par, u, v| c.density(par, UPair::new(u, v))
);
pair_scalar_op!(
    /// Copula distribution function C(u, v; theta).
    condvine_pair_cdf,
    |c, par, u, v| c.cdf(par, UPair::new(u, v))
);
pair_scalar_op!(
    /// h-function: conditional cdf of the first argument given the
    /// second, h(u | v; theta).
    condvine_pair_h,
    |c, par, u, v| c.h_function(par, UPair::new(u, v))
);
pair_scalar_op!(
    /// Inverse h-function in the first argument: u with h(u | v) = w,
    /// where `u` carries w on input.
    condvine_pair_h_inverse,
    |c, par, u, v| c.h_inverse(par, u, v)
);

/// Kendall's tau implied by the parameter.
///
/// # Safety
/// `out` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn condvine_pair_tau(
    family: CondvineFamily,
    rotation: CondvineRotation,
    theta: f64,
    out: *mut f64,
) -> CondvineStatus {
    if out.is_null() {
        return null_ptr("out");
    }
    let c = match pair(family, rotation) {
        Ok(c) => c,
        Err(s) => return s,
    };
    match c.tau(CopulaParam::new(theta)) {
        Ok(v) => {
            *out = v;
            CondvineStatus::Ok
        }
        Err(e) => remember(&e),
    }
}

/// Create a vine with the same family on every edge. The handle must
/// be released with `condvine_vine_free`.
///
/// # Safety
/// `out` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn condvine_vine_new(
    dimension: usize,
    kind: CondvineVineKind,
    family: CondvineFamily,
    rotation: CondvineRotation,
    out: *mut *mut CondvineVine,
) -> CondvineStatus {
    if out.is_null() {
        return null_ptr("out");
    }
    let edge = match pair(family, rotation) {
        Ok(c) => c,
        Err(s) => return s,
    };
    let kind = match kind {
        CondvineVineKind::DVine => VineKind::D,
        CondvineVineKind::CVine => VineKind::C,
    };
    match VineSpec::homogeneous(dimension, kind, edge) {
        Ok(spec) => {
            *out = Box::into_raw(Box::new(CondvineVine { spec }));
            CondvineStatus::Ok
        }
        Err(e) => remember(&e),
    }
}

/// Release a vine handle. Null is a no-op.
///
/// # Safety
/// `vine` must be null or a pointer returned by `condvine_vine_new`
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn condvine_vine_free(vine: *mut CondvineVine) {
    if !vine.is_null() {
        drop(Box::from_raw(vine));
    }
}

/// Number of edges (= number of parameters expected per evaluation).
///
/// # Safety
/// `vine` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn condvine_vine_edge_count(
    vine: *const CondvineVine,
    out: *mut usize,
) -> CondvineStatus {
    if vine.is_null() {
        return null_ptr("vine");
    }
    if out.is_null() {
        return null_ptr("out");
    }
    *out = (*vine).spec.edge_count();
    CondvineStatus::Ok
}

/// Vine copula log-density at one point. `thetas` holds one parameter
/// per edge in tree-major order; `u` holds `dimension` coordinates.
///
/// # Safety
/// Arrays must have the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn condvine_vine_log_density(
    vine: *const CondvineVine,
    thetas: *const f64,
    n_thetas: usize,
    u: *const f64,
    dimension: usize,
    out: *mut f64,
) -> CondvineStatus {
    if vine.is_null() {
        return null_ptr("vine");
    }
    if thetas.is_null() || u.is_null() || out.is_null() {
        return null_ptr("thetas/u/out");
    }
    let spec = &(*vine).spec;
    if dimension != spec.dimension {
        return invalid("u length does not match the vine dimension");
    }
    let params = VineParams(
        std::slice::from_raw_parts(thetas, n_thetas)
            .iter()
            .map(|&t| CopulaParam::new(t))
            .collect(),
    );
    let point = std::slice::from_raw_parts(u, dimension);
    match log_density(spec, &params, point) {
        Ok(v) => {
            *out = v;
            CondvineStatus::Ok
        }
        Err(e) => remember(&e),
    }
}

/// Simulate `n_rows` observations into `out` (row-major, `n_rows` x
/// `dimension`), deterministically from `seed`.
///
/// # Safety
/// `out` must hold `n_rows * dimension` writable doubles; `thetas`
/// must hold `n_thetas` doubles.
#[no_mangle]
pub unsafe extern "C" fn condvine_vine_simulate(
    vine: *const CondvineVine,
    thetas: *const f64,
    n_thetas: usize,
    seed: u64,
    n_rows: usize,
    out: *mut f64,
) -> CondvineStatus {
    if vine.is_null() {
        return null_ptr("vine");
    }
    if thetas.is_null() || out.is_null() {
        return null_ptr("thetas/out");
    }
    let spec = &(*vine).spec;
    let d = spec.dimension;
    let params = VineParams(
        std::slice::from_raw_parts(thetas, n_thetas)
            .iter()
            .map(|&t| CopulaParam::new(t))
            .collect(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n_rows {
        let w: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        match simulate_row(spec, &params, &w) {
            Ok(row) => {
                std::ptr::copy_nonoverlapping(row.as_ptr(), out.add(i * d), d);
            }
            Err(e) => return remember(&e),
        }
    }
    CondvineStatus::Ok
}

/// Load a posterior trace written by the CLI (NDJSON). The handle must
/// be released with `condvine_trace_free`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn condvine_trace_open(
    path: *const c_char,
    out: *mut *mut CondvineTrace,
) -> CondvineStatus {
    if path.is_null() {
        return null_ptr("path");
    }
    if out.is_null() {
        return null_ptr("out");
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(p) => p,
        Err(_) => return invalid("path is not valid UTF-8"),
    };
    match PosteriorTrace::read_ndjson(Path::new(path)) {
        Ok(trace) => {
            *out = Box::into_raw(Box::new(CondvineTrace { trace }));
            CondvineStatus::Ok
        }
        Err(e) => remember(&e),
    }
}

/// Release a trace handle. Null is a no-op.
///
/// # Safety
/// `trace` must be null or an unfreed pointer from
/// `condvine_trace_open`.
#[no_mangle]
pub unsafe extern "C" fn condvine_trace_free(trace: *mut CondvineTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of kept sweeps in the trace.
///
/// # Safety
/// `trace` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn condvine_trace_record_count(
    trace: *const CondvineTrace,
    out: *mut usize,
) -> CondvineStatus {
    if trace.is_null() {
        return null_ptr("trace");
    }
    if out.is_null() {
        return null_ptr("out");
    }
    *out = (*trace).trace.records.len();
    CondvineStatus::Ok
}

/// Number of observations the trace was fitted to.
///
/// # Safety
/// `trace` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn condvine_trace_n_obs(
    trace: *const CondvineTrace,
    out: *mut usize,
) -> CondvineStatus {
    if trace.is_null() {
        return null_ptr("trace");
    }
    if out.is_null() {
        return null_ptr("out");
    }
    *out = (*trace).trace.meta.n_obs;
    CondvineStatus::Ok
}

/// Most frequent cluster count across kept sweeps (smallest on ties).
///
/// # Safety
/// `trace` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn condvine_trace_modal_cluster_count(
    trace: *const CondvineTrace,
    out: *mut usize,
) -> CondvineStatus {
    if trace.is_null() {
        return null_ptr("trace");
    }
    if out.is_null() {
        return null_ptr("out");
    }
    *out = (*trace).trace.modal_cluster_count();
    CondvineStatus::Ok
}
