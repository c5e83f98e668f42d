//! C ABI for the qert expected-runtime analyzer.
//!
//! The interface follows three conventions:
//!
//! * Programs are held behind the opaque handle [`QertProgram`], created by
//!   [`qert_program_parse`] and released by [`qert_program_free`].
//! * Every fallible function returns a [`QertStatus`] code; on failure a
//!   human-readable message is available from [`qert_last_error_message`]
//!   until the next failing call on the same thread.
//! * Results are returned as JSON strings through `char **` out-parameters.
//!   They are heap-allocated and must be released with [`qert_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use qert::parser::{parse, pretty_print};
use qert::program::{Layout, Program};
use qert::report::{
    analyze_source, rho_spec_from_text, simulate_source, AnalysisOptions, McOptions,
};
use qert::Error;

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QertStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The program text could not be parsed.
    ParseError = 3,
    /// The program parsed but failed static validation.
    ValidationError = 4,
    /// An argument was structurally valid but semantically unusable
    /// (bad state description, dimension mismatch, out-of-range option).
    BadArgument = 5,
    /// The analysis itself failed (non-contractive transfer operator,
    /// singular linear system).
    AnalysisError = 6,
    /// An internal invariant was violated; the library state is still sound.
    InternalError = 7,
}

/// Opaque handle to a parsed and validated program.
pub struct QertProgram {
    program: Program,
    layout: Layout,
    source: String,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::default();
    });
}

fn fail(status: QertStatus, message: &str) -> QertStatus {
    set_last_error(message);
    status
}

fn status_for(err: &Error) -> QertStatus {
    match err {
        Error::Parse(_) => QertStatus::ParseError,
        Error::Validation(_) => QertStatus::ValidationError,
        Error::SpectrumExceedsUnit { .. } | Error::NeumannSingular { .. } => {
            QertStatus::AnalysisError
        }
        _ => QertStatus::BadArgument,
    }
}

/// Catches panics so they cannot unwind across the C boundary.
fn guarded<T>(body: impl FnOnce() -> Result<T, QertStatus>) -> Result<T, QertStatus> {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(result) => result,
        Err(_) => Err(fail(QertStatus::InternalError, "internal panic")),
    }
}

unsafe fn str_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, QertStatus> {
    if ptr.is_null() {
        return Err(fail(QertStatus::NullArgument, &format!("{name} is NULL")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(QertStatus::InvalidUtf8, &format!("{name} is not valid UTF-8")))
}

unsafe fn handle_arg<'a>(ptr: *const QertProgram) -> Result<&'a QertProgram, QertStatus> {
    if ptr.is_null() {
        return Err(fail(QertStatus::NullArgument, "program handle is NULL"));
    }
    Ok(&*ptr)
}

unsafe fn write_string(out: *mut *mut c_char, text: String) -> QertStatus {
    match CString::new(text) {
        Ok(cs) => {
            *out = cs.into_raw();
            QertStatus::Ok
        }
        Err(_) => fail(QertStatus::InternalError, "result contained a NUL byte"),
    }
}

/// Library version as a static NUL-terminated string. Do not free.
#[no_mangle]
pub extern "C" fn qert_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on the calling thread, as a
/// NUL-terminated UTF-8 string. Empty when the last call succeeded. The
/// pointer stays valid until the next failing call on this thread; do not
/// free it.
#[no_mangle]
pub extern "C" fn qert_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parses and validates program text. On success writes a fresh handle to
/// `out`; release it with `qert_program_free`.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qert_program_parse(
    source: *const c_char,
    out: *mut *mut QertProgram,
) -> QertStatus {
    if out.is_null() {
        return fail(QertStatus::NullArgument, "out is NULL");
    }
    let text = match str_arg(source, "source") {
        Ok(t) => t,
        Err(status) => return status,
    };
    let parsed = guarded(|| parse(text).map_err(|e| fail(status_for(&e), &e.to_string())));
    match parsed {
        Ok((program, layout)) => {
            clear_last_error();
            let handle = Box::new(QertProgram {
                program,
                layout,
                source: text.to_string(),
            });
            *out = Box::into_raw(handle);
            QertStatus::Ok
        }
        Err(status) => status,
    }
}

/// Releases a handle returned by `qert_program_parse`. NULL is a no-op.
///
/// # Safety
/// `program` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn qert_program_free(program: *mut QertProgram) {
    if !program.is_null() {
        drop(Box::from_raw(program));
    }
}

/// Total Hilbert-space dimension of the program's variables (the product of
/// the declared variable dimensions). Returns 0 if `program` is NULL.
///
/// # Safety
/// `program` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qert_program_dimension(program: *const QertProgram) -> usize {
    if program.is_null() {
        return 0;
    }
    (*program).layout.total_dim()
}

/// Writes the canonical text rendering of the program to `out`.
/// Release the string with `qert_string_free`.
///
/// # Safety
/// `program` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qert_program_pretty(
    program: *const QertProgram,
    out: *mut *mut c_char,
) -> QertStatus {
    if out.is_null() {
        return fail(QertStatus::NullArgument, "out is NULL");
    }
    let handle = match handle_arg(program) {
        Ok(h) => h,
        Err(status) => return status,
    };
    let text = guarded(|| Ok(pretty_print(&handle.program, &handle.layout)));
    match text {
        Ok(t) => {
            clear_last_error();
            write_string(out, t)
        }
        Err(status) => status,
    }
}

/// Runs the static expected-runtime analysis and writes the full report as
/// pretty-printed JSON to `out_json`. Release the string with
/// `qert_string_free`.
///
/// `rho_spec` selects the input state: a ket string such as `"|1>"` or
/// `"L,1"`, the literal `"maximally-mixed"`, or an inline JSON density
/// matrix `{"rows":..,"cols":..,"data":[[re,im],..]}` with `data` row-major.
///
/// Options (pass the neutral value to disable):
/// * `eps_spec` — spectral-gap cutoff in (0, 1); pass a value <= 0 for the
///   built-in default.
/// * `unfolding_terms` — number of truncated-series cross-check terms to
///   include in the report; 0 omits the series.
/// * `mc_shots` — Monte-Carlo cross-check trajectories; 0 omits the run.
///   `mc_max_steps` caps each trajectory (0 selects the default cap) and
///   `mc_seed` fixes the generator.
///
/// # Safety
/// `program` must be a live handle, `rho_spec` a NUL-terminated string, and
/// `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qert_analyze(
    program: *const QertProgram,
    rho_spec: *const c_char,
    eps_spec: f64,
    unfolding_terms: usize,
    mc_shots: u64,
    mc_max_steps: u64,
    mc_seed: u64,
    out_json: *mut *mut c_char,
) -> QertStatus {
    if out_json.is_null() {
        return fail(QertStatus::NullArgument, "out_json is NULL");
    }
    let handle = match handle_arg(program) {
        Ok(h) => h,
        Err(status) => return status,
    };
    let rho_text = match str_arg(rho_spec, "rho_spec") {
        Ok(t) => t,
        Err(status) => return status,
    };
    let json = guarded(|| {
        let spec = rho_spec_from_text(rho_text).map_err(|e| fail(status_for(&e), &e.to_string()))?;
        let mut opts = AnalysisOptions::default();
        if eps_spec > 0.0 {
            if eps_spec >= 1.0 {
                return Err(fail(QertStatus::BadArgument, "eps_spec must lie in (0, 1)"));
            }
            opts.eps_spec = eps_spec;
        }
        if unfolding_terms > 0 {
            opts.unfolding_terms = Some(unfolding_terms);
        }
        if mc_shots > 0 {
            let default_cap = McOptions::default().max_steps;
            opts.monte_carlo = Some(McOptions {
                shots: mc_shots,
                max_steps: if mc_max_steps == 0 { default_cap } else { mc_max_steps },
                seed: mc_seed,
            });
        }
        let report = analyze_source(&handle.source, &spec, &opts)
            .map_err(|e| fail(status_for(&e), &e.to_string()))?;
        Ok(report.to_json())
    });
    match json {
        Ok(s) => {
            clear_last_error();
            write_string(out_json, s)
        }
        Err(status) => status,
    }
}

/// Runs trajectory sampling only and writes the summary as pretty-printed
/// JSON (`mean`, `stderr`, `shots`, `timeouts`, `seed`) to `out_json`.
/// `mean`/`stderr` are JSON `null` when every trajectory hit the step cap.
/// `shots` must be at least 1; `max_steps` of 0 selects the default cap.
/// Release the string with `qert_string_free`.
///
/// # Safety
/// `program` must be a live handle, `rho_spec` a NUL-terminated string, and
/// `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qert_simulate(
    program: *const QertProgram,
    rho_spec: *const c_char,
    shots: u64,
    max_steps: u64,
    seed: u64,
    out_json: *mut *mut c_char,
) -> QertStatus {
    if out_json.is_null() {
        return fail(QertStatus::NullArgument, "out_json is NULL");
    }
    let handle = match handle_arg(program) {
        Ok(h) => h,
        Err(status) => return status,
    };
    let rho_text = match str_arg(rho_spec, "rho_spec") {
        Ok(t) => t,
        Err(status) => return status,
    };
    let json = guarded(|| {
        if shots == 0 {
            return Err(fail(QertStatus::BadArgument, "shots must be at least 1"));
        }
        let spec = rho_spec_from_text(rho_text).map_err(|e| fail(status_for(&e), &e.to_string()))?;
        let default_cap = McOptions::default().max_steps;
        let mc = McOptions {
            shots,
            max_steps: if max_steps == 0 { default_cap } else { max_steps },
            seed,
        };
        let summary = simulate_source(&handle.source, &spec, &mc)
            .map_err(|e| fail(status_for(&e), &e.to_string()))?;
        Ok(summary.to_json())
    });
    match json {
        Ok(s) => {
            clear_last_error();
            write_string(out_json, s)
        }
        Err(status) => status,
    }
}

/// Releases a string returned through a `char **` out-parameter.
/// NULL is a no-op.
///
/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn qert_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
