//! C ABI for the sysrel library.
//!
//! Every fallible function returns a [`SysrelStatus`]; on failure the message
//! is available from [`sysrel_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Strings returned
//! through `char **` are owned by the caller and released with
//! [`sysrel_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sysrel::composition::{parse_composition, CompositionExpr};
use sysrel::config::AnalysisConfig;
use sysrel::report::{reference_estimate, run_config, ReportDocument};
use sysrel::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SysrelStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidArgument = 4,
    Syntax = 5,
    Numerical = 6,
    Io = 7,
    Unsupported = 8,
    OutOfRange = 9,
    Panic = 10,
}

/// Parsed analysis configuration.
pub struct SysrelConfig {
    inner: AnalysisConfig,
}

/// Result of an analysis together with its configuration echo.
pub struct SysrelReport {
    inner: ReportDocument,
}

/// Parsed composition function `h(g1, …, gm)`.
pub struct SysrelComposition {
    inner: CompositionExpr,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SysrelStatus {
    match e {
        Error::Config { .. } => SysrelStatus::Config,
        Error::Argument(_) | Error::Domain(_) | Error::State(_) => SysrelStatus::InvalidArgument,
        Error::Syntax { .. } | Error::UnknownIdentifier(_) => SysrelStatus::Syntax,
        Error::Conditioning(_) | Error::NonFinite { .. } | Error::DegenerateVariance(_) | Error::Routing(_) => {
            SysrelStatus::Numerical
        }
        Error::Io(_) => SysrelStatus::Io,
        Error::Unsupported(_) => SysrelStatus::Unsupported,
    }
}

fn fail(status: SysrelStatus, msg: impl Into<String>) -> SysrelStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), SysrelStatus>) -> SysrelStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SysrelStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(SysrelStatus::Panic, "internal panic"),
    }
}

fn lib_err(e: Error) -> SysrelStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SysrelStatus> {
    if p.is_null() {
        return Err(fail(SysrelStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SysrelStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, SysrelStatus> {
    p.as_ref().ok_or_else(|| fail(SysrelStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, SysrelStatus> {
    p.as_mut().ok_or_else(|| fail(SysrelStatus::NullPointer, format!("{what} is NULL")))
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior NULs removed").into_raw()
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn sysrel_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sysrel_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sysrel_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a JSON configuration.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysrel_config_from_json(json: *const c_char, out: *mut *mut SysrelConfig) -> SysrelStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let cfg = AnalysisConfig::from_json(str_arg(json, "json")?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SysrelConfig { inner: cfg }));
        Ok(())
    })
}

/// Reads a JSON configuration file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysrel_config_load(path: *const c_char, out: *mut *mut SysrelConfig) -> SysrelStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let cfg = AnalysisConfig::load(str_arg(path, "path")?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SysrelConfig { inner: cfg }));
        Ok(())
    })
}

/// Replaces every seed of the configuration by the split of `seed`.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sysrel_config_set_seed(cfg: *mut SysrelConfig, seed: u64) -> SysrelStatus {
    guard(|| {
        out_ptr(cfg, "cfg")?.inner.set_seed(seed);
        Ok(())
    })
}

/// Checks the configuration; the error message names the offending field.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sysrel_config_validate(cfg: *const SysrelConfig) -> SysrelStatus {
    guard(|| handle(cfg, "cfg")?.inner.validate().map_err(lib_err))
}

/// Serialises the configuration to JSON.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysrel_config_to_json(cfg: *const SysrelConfig, out: *mut *mut c_char) -> SysrelStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = c_string(handle(cfg, "cfg")?.inner.to_json());
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and must not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn sysrel_config_free(cfg: *mut SysrelConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the active-learning analysis.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysrel_run(cfg: *const SysrelConfig, out: *mut *mut SysrelReport) -> SysrelStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let doc = run_config(&handle(cfg, "cfg")?.inner).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SysrelReport { inner: doc }));
        Ok(())
    })
}

/// Subset simulation on the true limit states, averaged over `repeats` runs.
/// Any of the output pointers may be NULL.
///
/// # Safety
/// `cfg` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysrel_reference(
    cfg: *const SysrelConfig,
    repeats: usize,
    pf: *mut f64,
    beta: *mut f64,
    cov: *mut f64,
) -> SysrelStatus {
    guard(|| {
        let est = reference_estimate(&handle(cfg, "cfg")?.inner, repeats).map_err(lib_err)?;
        for (p, v) in [(pf, est.pf), (beta, est.beta), (cov, est.cov)] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Scalar results of a run. Any of the output pointers may be NULL.
///
/// # Safety
/// `report` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysrel_report_summary(
    report: *const SysrelReport,
    pf: *mut f64,
    beta: *mut f64,
    converged: *mut bool,
    total_evaluations: *mut usize,
) -> SysrelStatus {
    guard(|| {
        let r = &handle(report, "report")?.inner.report;
        for (p, v) in [(pf, r.pf), (beta, r.beta)] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        if let Some(p) = converged.as_mut() {
            *p = r.converged;
        }
        if let Some(p) = total_evaluations.as_mut() {
            *p = r.total_evaluations;
        }
        Ok(())
    })
}

/// Number of components of the analysed system.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysrel_report_n_components(report: *const SysrelReport, out: *mut usize) -> SysrelStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(report, "report")?.inner.report.evaluations.len();
        Ok(())
    })
}

/// True limit-state evaluations and enrichments of component `j` (0-based).
///
/// # Safety
/// `report` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysrel_report_component(
    report: *const SysrelReport,
    j: usize,
    evaluations: *mut usize,
    enrichments: *mut usize,
) -> SysrelStatus {
    guard(|| {
        let r = &handle(report, "report")?.inner.report;
        if j >= r.evaluations.len() {
            return Err(fail(SysrelStatus::OutOfRange, format!("component {j} out of range (m = {})", r.evaluations.len())));
        }
        if let Some(p) = evaluations.as_mut() {
            *p = r.evaluations[j];
        }
        if let Some(p) = enrichments.as_mut() {
            *p = r.enrichments_of(j);
        }
        Ok(())
    })
}

/// Full report, including the configuration echo, as JSON.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysrel_report_to_json(report: *const SysrelReport, out: *mut *mut c_char) -> SysrelStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = c_string(handle(report, "report")?.inner.to_json());
        Ok(())
    })
}

/// Iteration history as CSV.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysrel_report_history_csv(report: *const SysrelReport, out: *mut *mut c_char) -> SysrelStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = c_string(handle(report, "report")?.inner.history_csv());
        Ok(())
    })
}

/// # Safety
/// `report` must come from this library and must not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn sysrel_report_free(report: *mut SysrelReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Parses a composition such as `"min(g1, max(g2, g3))"`.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysrel_composition_parse(text: *const c_char, out: *mut *mut SysrelComposition) -> SysrelStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let expr = parse_composition(str_arg(text, "text")?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SysrelComposition { inner: expr }));
        Ok(())
    })
}

/// Number of components `m` the composition refers to.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysrel_composition_n_components(h: *const SysrelComposition, out: *mut usize) -> SysrelStatus {
    guard(|| {
        *out_ptr(out, "out")? = handle(h, "h")?.inner.n_components();
        Ok(())
    })
}

/// Evaluates the composition at `z[0..n]`; `n` must be at least `m`.
///
/// # Safety
/// `h` must be a live handle, `z` must point to `n` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysrel_composition_eval(
    h: *const SysrelComposition,
    z: *const f64,
    n: usize,
    out: *mut f64,
) -> SysrelStatus {
    guard(|| {
        let h = &handle(h, "h")?.inner;
        let out = out_ptr(out, "out")?;
        if z.is_null() {
            return Err(fail(SysrelStatus::NullPointer, "z is NULL"));
        }
        if n < h.n_components() {
            return Err(fail(SysrelStatus::InvalidArgument, format!("need {} values, got {n}", h.n_components())));
        }
        *out = h.eval(std::slice::from_raw_parts(z, n));
        Ok(())
    })
}

/// Canonical text of the composition.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sysrel_composition_to_string(h: *const SysrelComposition, out: *mut *mut c_char) -> SysrelStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = c_string(handle(h, "h")?.inner.to_string());
        Ok(())
    })
}

/// # Safety
/// `h` must come from this library and must not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn sysrel_composition_free(h: *mut SysrelComposition) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}
