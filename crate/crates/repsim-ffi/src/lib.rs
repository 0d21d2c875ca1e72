//! C ABI for the repsim library: opaque matrix handles, status codes,
//! and scalar measure evaluation, so other languages can bind without a
//! Rust toolchain.
//!
//! Every function is null-safe and returns a [`RepsimStatus`]; values
//! come back through out-pointers. Handles own their data and must be
//! released with [`repsim_matrix_free`].

use std::ffi::{c_char, CStr};

use repsim::measures::{similarity_report, Measure};
use repsim::{DataMatrix, Error, Tolerances};

/// Result of a C API call. Numbering matches the CLI exit codes where a
/// category exists there (3 = dimension mismatch, 4 = degenerate input,
/// 5 = numerical failure).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepsimStatus {
    Ok = 0,
    /// Null pointer, non-finite data, zero dimension, or unknown name.
    InvalidArgument = 1,
    DimensionMismatch = 3,
    DegenerateInput = 4,
    Numerical = 5,
}

fn status_of(error: &Error) -> RepsimStatus {
    match error {
        Error::DimensionMismatch(_) => RepsimStatus::DimensionMismatch,
        Error::DegenerateInput(_) => RepsimStatus::DegenerateInput,
        Error::NotPsd(_) | Error::Numerical(_) => RepsimStatus::Numerical,
        Error::Parse { .. } | Error::Io { .. } => RepsimStatus::InvalidArgument,
    }
}

/// Opaque activation matrix handle (rows = stimuli, columns = neurons).
pub struct RepsimMatrix {
    inner: DataMatrix,
}

/// Duality check result: absolute discrepancies between the kernel-route
/// and covariance-route values, and whether all are within tolerance.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RepsimDualityReport {
    pub bures_vs_procrustes_abs_err: f64,
    pub nbs_vs_cos_theta_abs_err: f64,
    pub fidelity_vs_nuclear_abs_err: f64,
    pub pass: bool,
}

/// Creates a matrix handle from `rows * cols` finite values in row-major
/// order. On success writes the handle to `out` and returns OK; `out` is
/// untouched on failure.
///
/// # Safety
/// `values` must point to `rows * cols` readable doubles and `out` to a
/// writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn repsim_matrix_create(
    rows: usize,
    cols: usize,
    values: *const f64,
    out: *mut *mut RepsimMatrix,
) -> RepsimStatus {
    if values.is_null() || out.is_null() || rows == 0 || cols == 0 {
        return RepsimStatus::InvalidArgument;
    }
    let data = std::slice::from_raw_parts(values, rows * cols);
    if !data.iter().all(|v| v.is_finite()) {
        return RepsimStatus::InvalidArgument;
    }
    match DataMatrix::from_row_major(rows, cols, data) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(RepsimMatrix { inner }));
            RepsimStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Releases a handle created by [`repsim_matrix_create`]. Null is a no-op.
///
/// # Safety
/// `matrix` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn repsim_matrix_free(matrix: *mut RepsimMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// Stimulus count of a matrix handle; 0 for null.
///
/// # Safety
/// `matrix` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn repsim_matrix_rows(matrix: *const RepsimMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.inner.nrows())
}

/// Neuron count of a matrix handle; 0 for null.
///
/// # Safety
/// `matrix` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn repsim_matrix_cols(matrix: *const RepsimMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.inner.ncols())
}

/// Evaluates one similarity measure between two matrices over the same
/// stimuli. `measure` is one of: "angular", "procrustes", "riemannian",
/// "cka", "nbs", "bures", "fidelity", "normalized_procrustes",
/// "normalized_bures", "rdm". Writes the value to `out` on success.
///
/// # Safety
/// `x` and `y` must be live handles, `measure` a NUL-terminated string,
/// and `out` a writable double slot.
#[no_mangle]
pub unsafe extern "C" fn repsim_measure(
    x: *const RepsimMatrix,
    y: *const RepsimMatrix,
    measure: *const c_char,
    out: *mut f64,
) -> RepsimStatus {
    let (Some(x), Some(y)) = (x.as_ref(), y.as_ref()) else {
        return RepsimStatus::InvalidArgument;
    };
    if measure.is_null() || out.is_null() {
        return RepsimStatus::InvalidArgument;
    }
    let Ok(name) = CStr::from_ptr(measure).to_str() else {
        return RepsimStatus::InvalidArgument;
    };
    let Ok(measure) = name.parse::<Measure>() else {
        return RepsimStatus::InvalidArgument;
    };
    let tol = Tolerances::default();
    match similarity_report(&x.inner, &y.inner, &[measure], &tol) {
        Ok(report) => match &report.results[0].value {
            Some(value) => {
                *out = *value;
                RepsimStatus::Ok
            }
            None => match report.results[0].exit_code {
                Some(3) => RepsimStatus::DimensionMismatch,
                Some(4) => RepsimStatus::DegenerateInput,
                _ => RepsimStatus::Numerical,
            },
        },
        Err(e) => status_of(&e),
    }
}

/// Runs the duality verification (Bures vs Procrustes, NBS vs cosine of
/// the shape distance, fidelity vs cross-covariance nuclear norm) and
/// fills `out`.
///
/// # Safety
/// `x` and `y` must be live handles and `out` a writable report slot.
#[no_mangle]
pub unsafe extern "C" fn repsim_verify_duality(
    x: *const RepsimMatrix,
    y: *const RepsimMatrix,
    out: *mut RepsimDualityReport,
) -> RepsimStatus {
    let (Some(x), Some(y)) = (x.as_ref(), y.as_ref()) else {
        return RepsimStatus::InvalidArgument;
    };
    if out.is_null() {
        return RepsimStatus::InvalidArgument;
    }
    match repsim::duality::verify_duality(&x.inner, &y.inner, &Tolerances::default()) {
        Ok(report) => {
            *out = RepsimDualityReport {
                bures_vs_procrustes_abs_err: report.bures_vs_procrustes_abs_err,
                nbs_vs_cos_theta_abs_err: report.nbs_vs_cos_theta_abs_err,
                fidelity_vs_nuclear_abs_err: report.fidelity_vs_nuclear_abs_err,
                pass: report.pass,
            };
            RepsimStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn repsim_status_name(status: RepsimStatus) -> *const c_char {
    let name: &'static [u8] = match status {
        RepsimStatus::Ok => b"ok\0",
        RepsimStatus::InvalidArgument => b"invalid argument\0",
        RepsimStatus::DimensionMismatch => b"dimension mismatch\0",
        RepsimStatus::DegenerateInput => b"degenerate input\0",
        RepsimStatus::Numerical => b"numerical failure\0",
    };
    name.as_ptr().cast()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn repsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
