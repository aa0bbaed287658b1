//! C ABI for `gola-core`.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every function returns a
//! [`GolaStatus`]; on failure a description is available from
//! [`gola_last_error_message`] on the same thread. Strings returned through
//! `char **` out-parameters are owned by the caller and released with
//! [`gola_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use gola_core::density::{LogDensity, MixtureModel, SearchBox, UnnormalizedTarget};
use gola_core::gola::{run_gola, GolaConfig};
use gola_core::metrics::jsd_normalized;
use gola_core::Error;

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GolaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Derivative = 4,
    Singular = 5,
    RejectedStart = 6,
    NoModesFound = 7,
    DegenerateMode = 8,
    Scaling = 9,
    Unsupported = 10,
    Generation = 11,
    DegenerateOutput = 12,
    ModelFailure = 13,
    Config = 14,
    Io = 15,
    Json = 16,
    Utf8 = 17,
    BufferTooSmall = 18,
    Panic = 19,
}

impl From<&Error> for GolaStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) => GolaStatus::InvalidArgument,
            Error::DimensionMismatch { .. } => GolaStatus::DimensionMismatch,
            Error::Derivative { .. } => GolaStatus::Derivative,
            Error::Singular { .. } => GolaStatus::Singular,
            Error::RejectedStart { .. } => GolaStatus::RejectedStart,
            Error::NoModesFound { .. } => GolaStatus::NoModesFound,
            Error::DegenerateMode { .. } => GolaStatus::DegenerateMode,
            Error::Scaling => GolaStatus::Scaling,
            Error::Unsupported(_) => GolaStatus::Unsupported,
            Error::Generation(_) => GolaStatus::Generation,
            Error::DegenerateOutput(_) => GolaStatus::DegenerateOutput,
            Error::ModelFailure { .. } => GolaStatus::ModelFailure,
            Error::Config(_) => GolaStatus::Config,
            Error::Io { .. } => GolaStatus::Io,
            Error::Json(_) => GolaStatus::Json,
        }
    }
}

/// Opaque Gaussian mixture.
pub struct GolaMixture(MixtureModel);

/// Opaque pipeline result.
pub struct GolaReport(gola_core::gola::GolaReport);

/// Unnormalized log density `log φ(z)` supplied by the caller. Called
/// concurrently from several threads; return `-INFINITY` outside the
/// support.
pub type GolaLogDensityFn = Option<unsafe extern "C" fn(z: *const f64, dim: usize, user_data: *mut c_void) -> f64>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(GolaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(GolaStatus::from(&e), e.to_string())
    }
}

fn fail(status: GolaStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GolaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            GolaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            GolaStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(GolaStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(GolaStatus::NullPointer, format!("{what} is null")))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(GolaStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(GolaStatus::Utf8, format!("{what} is not UTF-8: {e}")))
}

unsafe fn read_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(GolaStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| fail(GolaStatus::Utf8, "string contains a NUL byte"))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn gola_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gola_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gola_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a mixture from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gola_mixture_from_json(json: *const c_char, out: *mut *mut GolaMixture) -> GolaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let m = MixtureModel::from_json(read_str(json, "json")?)?;
        *out = Box::into_raw(Box::new(GolaMixture(m)));
        Ok(())
    })
}

/// Serialize a mixture to JSON. Free the result with [`gola_string_free`].
///
/// # Safety
/// `mixture` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gola_mixture_to_json(mixture: *const GolaMixture, out: *mut *mut c_char) -> GolaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        *out = to_c_string(non_null(mixture, "mixture")?.0.to_json())?;
        Ok(())
    })
}

/// Dimension and component count of a mixture. Either out-pointer may be null.
///
/// # Safety
/// `mixture` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gola_mixture_shape(
    mixture: *const GolaMixture,
    dim: *mut usize,
    n_components: *mut usize,
) -> GolaStatus {
    guard(|| {
        let m = &non_null(mixture, "mixture")?.0;
        if let Some(d) = dim.as_mut() {
            *d = m.dim();
        }
        if let Some(k) = n_components.as_mut() {
            *k = m.n_components();
        }
        Ok(())
    })
}

/// Copy the mixture weights into `out[0..len]`; `len` must equal the
/// component count.
///
/// # Safety
/// `mixture` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gola_mixture_weights(mixture: *const GolaMixture, out: *mut f64, len: usize) -> GolaStatus {
    guard(|| {
        let m = &non_null(mixture, "mixture")?.0;
        if len != m.n_components() {
            return Err(fail(GolaStatus::BufferTooSmall, format!("need {} weights, buffer holds {len}", m.n_components())));
        }
        if out.is_null() {
            return Err(fail(GolaStatus::NullPointer, "out is null"));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(m.weights());
        Ok(())
    })
}

/// Normalized log density at `z[0..dim]`.
///
/// # Safety
/// `mixture` must be a live handle; `z` must hold `dim` doubles; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn gola_mixture_log_pdf(
    mixture: *const GolaMixture,
    z: *const f64,
    dim: usize,
    out: *mut f64,
) -> GolaStatus {
    guard(|| {
        let m = &non_null(mixture, "mixture")?.0;
        let out = out_ptr(out, "out")?;
        if dim != m.dim() {
            return Err(Error::DimensionMismatch { expected: m.dim(), got: dim }.into());
        }
        *out = m.log_pdf(read_slice(z, dim, "z")?);
        Ok(())
    })
}

/// Draw `n` samples into `out` as an `n × dim` row-major array;
/// `out_len` must be at least `n * dim`.
///
/// # Safety
/// `mixture` must be a live handle; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gola_mixture_sample(
    mixture: *const GolaMixture,
    n: usize,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> GolaStatus {
    guard(|| {
        let m = &non_null(mixture, "mixture")?.0;
        let d = m.dim();
        let need = n
            .checked_mul(d)
            .ok_or_else(|| fail(GolaStatus::InvalidArgument, "n * dim overflows"))?;
        if out_len < need {
            return Err(fail(GolaStatus::BufferTooSmall, format!("need {need} doubles, buffer holds {out_len}")));
        }
        if need == 0 {
            return Ok(());
        }
        if out.is_null() {
            return Err(fail(GolaStatus::NullPointer, "out is null"));
        }
        let draws = m.sample(n, seed);
        let buf = std::slice::from_raw_parts_mut(out, need);
        for i in 0..n {
            for j in 0..d {
                buf[i * d + j] = draws[(i, j)];
            }
        }
        Ok(())
    })
}

/// Release a mixture handle. Null is ignored.
///
/// # Safety
/// `mixture` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gola_mixture_free(mixture: *mut GolaMixture) {
    if !mixture.is_null() {
        drop(Box::from_raw(mixture));
    }
}

/// Monte Carlo Jensen-Shannon divergence in bits, `n` draws from each
/// side. `std_error` may be null.
///
/// # Safety
/// `p` and `q` must be live handles; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gola_jsd(
    p: *const GolaMixture,
    q: *const GolaMixture,
    n: usize,
    seed: u64,
    value: *mut f64,
    std_error: *mut f64,
) -> GolaStatus {
    guard(|| {
        let (p, q) = (&non_null(p, "p")?.0, &non_null(q, "q")?.0);
        let value = out_ptr(value, "value")?;
        let est = jsd_normalized(p, q, n, seed)?;
        *value = est.value;
        if let Some(se) = std_error.as_mut() {
            *se = est.std_error;
        }
        Ok(())
    })
}

/// Default pipeline settings as JSON, a template for [`gola_run`].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gola_config_default_json(out: *mut *mut c_char) -> GolaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let s = serde_json::to_string_pretty(&GolaConfig::default()).map_err(Error::from)?;
        *out = to_c_string(s)?;
        Ok(())
    })
}

struct CallbackDensity {
    f: unsafe extern "C" fn(*const f64, usize, *mut c_void) -> f64,
    user_data: *mut c_void,
    dim: usize,
}

// The caller promises that the callback is safe to invoke concurrently.
unsafe impl Send for CallbackDensity {}
unsafe impl Sync for CallbackDensity {}

impl LogDensity for CallbackDensity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        let v = unsafe { (self.f)(z.as_ptr(), self.dim, self.user_data) };
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

/// Fit a Gaussian mixture to the caller's log density on the box
/// `[lower, upper]`. `config_json` may be null for defaults; unknown keys
/// are rejected. NaN returned by the callback is treated as `-INFINITY`.
///
/// # Safety
/// `log_density` must be callable from several threads at once with
/// `user_data`; `lower` and `upper` must hold `dim` doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn gola_run(
    log_density: GolaLogDensityFn,
    user_data: *mut c_void,
    dim: usize,
    lower: *const f64,
    upper: *const f64,
    config_json: *const c_char,
    out: *mut *mut GolaReport,
) -> GolaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let f = log_density.ok_or_else(|| fail(GolaStatus::NullPointer, "log_density is null"))?;
        if dim == 0 {
            return Err(fail(GolaStatus::InvalidArgument, "dim must be positive"));
        }
        let bounds = SearchBox::new(read_slice(lower, dim, "lower")?.to_vec(), read_slice(upper, dim, "upper")?.to_vec())?;
        let cfg: GolaConfig = if config_json.is_null() {
            GolaConfig::default()
        } else {
            serde_json::from_str(read_str(config_json, "config_json")?).map_err(Error::from)?
        };
        let target = UnnormalizedTarget::new(Arc::new(CallbackDensity { f, user_data, dim }), bounds)?;
        let report = run_gola(&target, &cfg)?;
        *out = Box::into_raw(Box::new(GolaReport(report)));
        Ok(())
    })
}

/// Copy of the fitted mixture as a new handle.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gola_report_mixture(report: *const GolaReport, out: *mut *mut GolaMixture) -> GolaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let r = &non_null(report, "report")?.0;
        *out = Box::into_raw(Box::new(GolaMixture(r.mixture.clone())));
        Ok(())
    })
}

/// Natural log of the evidence estimate.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gola_report_log_evidence(report: *const GolaReport, out: *mut f64) -> GolaStatus {
    guard(|| {
        *out_ptr(out, "out")? = non_null(report, "report")?.0.log_evidence;
        Ok(())
    })
}

/// Full report as JSON. Free the result with [`gola_string_free`].
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gola_report_to_json(report: *const GolaReport, out: *mut *mut c_char) -> GolaStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        *out = to_c_string(non_null(report, "report")?.0.to_json())?;
        Ok(())
    })
}

/// Release a report handle. Null is ignored.
///
/// # Safety
/// `report` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gola_report_free(report: *mut GolaReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
