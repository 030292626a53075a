//! C ABI for the finslerlab curvature engine.
//!
//! Metrics are opaque `FlMetric` handles owned by the caller and released
//! with [`fl_metric_free`]. Every fallible function returns an [`FlStatus`];
//! on failure a message is stored per thread and read back with
//! [`fl_last_error_message`]. Output pointers are written only on success.
//! Panics never cross the boundary; they surface as `FL_STATUS_PANIC`.
//!
//! Array arguments are `dim`-length `double` buffers; expression arguments
//! are NUL-terminated UTF-8 strings in the engine's expression syntax.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use finslerlab::alphabeta::{AlphaSpec, BetaSpec};
use finslerlab::constructions::{self, PPowerSpec, Sqrt2dFamilySpec};
use finslerlab::finsler::{self, FinslerMetric, TangentSample};
use finslerlab::manifest;
use finslerlab::run::{self, RunOptions};
use finslerlab::Error;

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    /// The sample lies outside the metric domain or on a singular set.
    Domain = 5,
    Manifest = 6,
    Panic = 7,
}

/// Opaque metric handle.
pub struct FlMetric {
    metric: Box<dyn FinslerMetric>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("interior NULs removed")));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(FlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            _ if e.is_sample_local() => FlStatus::Domain,
            Error::Expr(_) => FlStatus::Parse,
            _ => FlStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FlStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FlStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FlStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(FlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(FlStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn c_strs(p: *const *const c_char, len: usize, what: &str) -> Result<Vec<String>, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    (0..len).map(|i| c_str(*p.add(i), what).map(str::to_string)).collect()
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a>(m: *const FlMetric) -> Result<&'a FlMetric, Failure> {
    m.as_ref().ok_or_else(|| null("metric"))
}

unsafe fn emit(out: *mut *mut FlMetric, metric: Box<dyn FinslerMetric>) -> Result<(), Failure> {
    *out = Box::into_raw(Box::new(FlMetric { metric }));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn fl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// p-power metric `F = alpha (1 + beta/alpha)^p`.
///
/// `a` holds `dim * dim` row-major expressions for `a_ij`; `b` holds `dim`
/// expressions for `b_i`.
///
/// # Safety
/// `a` and `b` must point to that many valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fl_metric_ppower(
    dim: usize,
    a: *const *const c_char,
    b: *const *const c_char,
    p: f64,
    out: *mut *mut FlMetric,
) -> FlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !(2..=8).contains(&dim) {
            return Err(Failure(FlStatus::InvalidArgument, format!("dimension {dim} outside 2..=8")));
        }
        let a = c_strs(a, dim * dim, "a")?;
        let rows: Vec<Vec<String>> = a.chunks(dim).map(<[String]>::to_vec).collect();
        let alpha = AlphaSpec::parse(&rows)?;
        let beta = BetaSpec::parse(&c_strs(b, dim, "b")?)?;
        let spec = PPowerSpec::new(alpha, beta, p)?;
        emit(out, Box::new(constructions::ppower_metric(spec)))
    })
}

/// Two-dimensional square-root metric built from `(u, v, B)`.
///
/// # Safety
/// `u`, `v`, `b` must be valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fl_metric_sqrt2d(
    u: *const c_char,
    v: *const c_char,
    b: *const c_char,
    out: *mut *mut FlMetric,
) -> FlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = Sqrt2dFamilySpec::parse(c_str(u, "u")?, c_str(v, "v")?, c_str(b, "B")?)?;
        emit(out, Box::new(constructions::sqrt2d_family(&spec).metric()))
    })
}

/// Releases a handle; NULL is ignored.
///
/// # Safety
/// `m` must come from a constructor of this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn fl_metric_free(m: *mut FlMetric) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Dimension of the metric, or 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fl_metric_dim(m: *const FlMetric) -> usize {
    m.as_ref().map_or(0, |h| h.metric.dim())
}

unsafe fn sample(h: &FlMetric, x: *const f64, y: *const f64) -> Result<TangentSample, Failure> {
    let n = h.metric.dim();
    Ok(TangentSample::new(slice(x, n, "x")?.to_vec(), slice(y, n, "y")?.to_vec()))
}

unsafe fn write_scalar(out: *mut f64, f: impl FnOnce() -> Result<f64, Failure>) -> FlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let v = f()?;
        *out = v;
        Ok(())
    })
}

/// `F(x, y)`.
///
/// # Safety
/// `m` must be a live handle, `x` and `y` `dim`-length arrays, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fl_metric_value(m: *const FlMetric, x: *const f64, y: *const f64, out: *mut f64) -> FlStatus {
    write_scalar(out, || {
        let h = handle(m)?;
        let s = sample(h, x, y)?;
        Ok(h.metric.value(&s.x, &s.y)?)
    })
}

/// Geodesic coefficients `G^i(x, y)` written to `out[0..dim]`.
///
/// # Safety
/// `m` must be a live handle and all arrays `dim` long.
#[no_mangle]
pub unsafe extern "C" fn fl_metric_spray(m: *const FlMetric, x: *const f64, y: *const f64, out: *mut f64) -> FlStatus {
    guard(|| {
        let h = handle(m)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let g = finsler::spray(&h.metric, &sample(h, x, y)?)?;
        ptr::copy_nonoverlapping(g.as_ptr(), out, g.len());
        Ok(())
    })
}

/// Ricci curvature `Ric(x, y)`.
///
/// # Safety
/// As for [`fl_metric_value`].
#[no_mangle]
pub unsafe extern "C" fn fl_metric_ricci(m: *const FlMetric, x: *const f64, y: *const f64, out: *mut f64) -> FlStatus {
    write_scalar(out, || {
        let h = handle(m)?;
        Ok(finsler::ricci(&h.metric, &sample(h, x, y)?)?)
    })
}

/// Einstein scalar `lambda = Ric / ((n - 1) F^2)`.
///
/// # Safety
/// As for [`fl_metric_value`].
#[no_mangle]
pub unsafe extern "C" fn fl_metric_einstein_scalar(
    m: *const FlMetric,
    x: *const f64,
    y: *const f64,
    out: *mut f64,
) -> FlStatus {
    write_scalar(out, || {
        let h = handle(m)?;
        Ok(finsler::einstein_scalar(&h.metric, &sample(h, x, y)?)?)
    })
}

/// Flag curvature of the plane spanned by `y` and `u` at `x`.
///
/// # Safety
/// As for [`fl_metric_value`]; `u` is also `dim` long.
#[no_mangle]
pub unsafe extern "C" fn fl_metric_flag_curvature(
    m: *const FlMetric,
    x: *const f64,
    y: *const f64,
    u: *const f64,
    out: *mut f64,
) -> FlStatus {
    write_scalar(out, || {
        let h = handle(m)?;
        let u = slice(u, h.metric.dim(), "u")?;
        Ok(finsler::flag_curvature(&h.metric, &sample(h, x, y)?, u)?)
    })
}

/// Runs a JSON manifest and returns the JSON report in `*out_json`, to be
/// released with [`fl_string_free`]. `*out_verdict` is 1 when every check
/// passed and 0 otherwise.
///
/// # Safety
/// `manifest_json` must be a valid C string; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn fl_run_manifest(
    manifest_json: *const c_char,
    out_json: *mut *mut c_char,
    out_verdict: *mut i32,
) -> FlStatus {
    guard(|| {
        if out_json.is_null() || out_verdict.is_null() {
            return Err(null("output"));
        }
        let text = c_str(manifest_json, "manifest_json")?;
        let m = manifest::parse_manifest(text).map_err(|e| Failure(FlStatus::Manifest, e.to_string()))?;
        let report = run::run(&m, &RunOptions::default());
        let json = CString::new(report.to_json()).map_err(|_| Failure(FlStatus::Panic, "report contains NUL".into()))?;
        *out_json = json.into_raw();
        *out_verdict = i32::from(report.verdict);
        Ok(())
    })
}

/// Releases a string returned by this library; NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn fl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
