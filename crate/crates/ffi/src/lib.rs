//! C ABI for the solarpot engine.
//!
//! Conventions: functions return an [`SpStatus`] code; `SP_STATUS_OK` is 0.
//! On failure a thread-local message is readable via [`sp_last_error`].
//! Handles ([`SpConfig`], [`SpReport`]) are opaque; free them with the
//! matching `_free` function. Strings returned by the library must be
//! released with [`sp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use solarpot::ingest::RunConfig;
use solarpot::pipeline;
use solarpot::Error;

/// Result codes for every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpStatus {
    /// Success.
    Ok = 0,
    /// A pointer argument was null.
    NullPointer = 1,
    /// Invalid argument or configuration.
    Argument = 2,
    /// File could not be read or written.
    Io = 3,
    /// Input file failed to parse or validate.
    Format = 4,
    /// The pipeline run itself failed.
    Run = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(e: &Error) -> SpStatus {
    let status = match e {
        Error::Argument(_) | Error::Range(_) => SpStatus::Argument,
        Error::Io { .. } => SpStatus::Io,
        Error::Format { .. } | Error::Schema { .. } | Error::Referential(_)
        | Error::Continuity(_) | Error::Json(_) => SpStatus::Format,
        _ => SpStatus::Run,
    };
    let msg = CString::new(e.to_string()).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
    status
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Opaque run configuration handle.
pub struct SpConfig {
    inner: RunConfig,
}

/// Opaque report handle produced by [`sp_run`].
pub struct SpReport {
    report: serde_json::Value,
    error_fraction: f64,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread, or null after a
/// success. The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sp_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |s| s.as_ptr())
    })
}

unsafe fn path_arg<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

/// Load a run configuration from a JSON file into a new handle.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_config_load(
    path: *const c_char,
    out: *mut *mut SpConfig,
) -> SpStatus {
    if out.is_null() {
        return SpStatus::NullPointer;
    }
    let Some(path) = path_arg(path) else { return SpStatus::NullPointer };
    match RunConfig::load(Path::new(path)) {
        Ok(inner) => {
            clear_error();
            *out = Box::into_raw(Box::new(SpConfig { inner }));
            SpStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Release a configuration handle. Null is accepted.
///
/// # Safety
/// `cfg` must come from [`sp_config_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sp_config_free(cfg: *mut SpConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Execute the full pipeline for `cfg`. Writes the report and summary files
/// named by the configuration and returns the report as a handle.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_run(cfg: *const SpConfig, out: *mut *mut SpReport) -> SpStatus {
    if cfg.is_null() || out.is_null() {
        return SpStatus::NullPointer;
    }
    match pipeline::execute_run(&(*cfg).inner) {
        Ok(r) => {
            clear_error();
            *out = Box::into_raw(Box::new(SpReport {
                report: r.report,
                error_fraction: r.error_fraction,
            }));
            SpStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Release a report handle. Null is accepted.
///
/// # Safety
/// `report` must come from [`sp_run`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sp_report_free(report: *mut SpReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

unsafe fn report_total(report: *const SpReport, key: &str, out: *mut f64) -> SpStatus {
    if report.is_null() || out.is_null() {
        return SpStatus::NullPointer;
    }
    *out = (&(*report).report)["totals"][key].as_f64().unwrap_or(0.0);
    SpStatus::Ok
}

/// Total annual potential (kWh/year) over all successful sections.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_report_total_potential(
    report: *const SpReport,
    out: *mut f64,
) -> SpStatus {
    report_total(report, "potential_kwh_per_year", out)
}

/// Number of successfully processed sections.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_report_section_count(
    report: *const SpReport,
    out: *mut usize,
) -> SpStatus {
    if report.is_null() || out.is_null() {
        return SpStatus::NullPointer;
    }
    *out = (&(*report).report)["totals"]["n_ok"].as_u64().unwrap_or(0) as usize;
    SpStatus::Ok
}

/// Number of per-section error records.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_report_error_count(
    report: *const SpReport,
    out: *mut usize,
) -> SpStatus {
    if report.is_null() || out.is_null() {
        return SpStatus::NullPointer;
    }
    *out = (&(*report).report)["totals"]["n_errors"].as_u64().unwrap_or(0) as usize;
    SpStatus::Ok
}

/// Fraction of sections that failed, in [0, 1].
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_report_error_fraction(
    report: *const SpReport,
    out: *mut f64,
) -> SpStatus {
    if report.is_null() || out.is_null() {
        return SpStatus::NullPointer;
    }
    *out = (*report).error_fraction;
    SpStatus::Ok
}

/// Serialize the full report to a JSON string; free it with
/// [`sp_string_free`].
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_report_to_json(
    report: *const SpReport,
    out: *mut *mut c_char,
) -> SpStatus {
    if report.is_null() || out.is_null() {
        return SpStatus::NullPointer;
    }
    let report = &*report;
    match serde_json::to_string_pretty(&report.report) {
        Ok(s) => {
            clear_error();
            *out = CString::new(s).unwrap_or_default().into_raw();
            SpStatus::Ok
        }
        Err(e) => set_error(&Error::Json(e)),
    }
}

/// Release a string returned by this library. Null is accepted.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// solar potential (kWh/year) = n_modules * power_wp/1000 * pvout.
/// All inputs must be non-negative.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_potential_kwh_per_year(
    n_modules: f64,
    power_wp: f64,
    pvout_kwh_per_kwp: f64,
    out: *mut f64,
) -> SpStatus {
    if out.is_null() {
        return SpStatus::NullPointer;
    }
    match pipeline::potential_kwh_per_year(n_modules, power_wp, pvout_kwh_per_kwp) {
        Ok(v) => {
            clear_error();
            *out = v;
            SpStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}
