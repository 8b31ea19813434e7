//! C ABI over the krama library.
//!
//! Plans are parsed into opaque `KramaPlan` handles. Every call returns a
//! `KramaStatus`; on failure a message is kept per thread and can be read
//! with `krama_last_error_message`. Strings handed out by this library
//! must be released with `krama_string_free`, plans with `krama_plan_free`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use krama::deduction::{check_derivation, derive, format_proof};
use krama::oracle::{cross_check, OracleError, OracleOptions};
use krama::{
    eval_formula, format_plan, parse_plan, validate_sequence, DependencyMode, EvalStatus, Notation, PlanDocument,
    TieBreak,
};
use libc::{c_char, c_int, size_t};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KramaStatus {
    Ok = 0,
    /// The plan was processed but its sequence is not valid, not
    /// derivable, or disagrees with direct execution.
    Invalid = 1,
    ParseError = 2,
    /// The composition could not be built or evaluated.
    PlanError = 3,
    NullPointer = 4,
    Utf8 = 5,
    /// The plan has more instructions than the enumeration bound.
    TooLarge = 6,
    Internal = 7,
}

/// Three-valued evaluation result.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KramaEval {
    Satisfied = 0,
    Violated = 1,
    NotApplicable = 2,
}

/// Where consecutive dependencies come from.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KramaDeps {
    Inferred = 0,
    Declared = 1,
}

/// A parsed plan document.
pub struct KramaPlan {
    doc: PlanDocument,
}

/// Counts from an oracle run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KramaOracleSummary {
    pub permutations: size_t,
    pub executable: size_t,
    pub theorem_valid: size_t,
    pub derivable: size_t,
    pub discrepancies: size_t,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(KramaStatus, String);

fn fail(status: KramaStatus, message: impl Into<String>) -> Fail {
    Fail(status, message.into())
}

/// Runs `f`, recording failures and turning panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<KramaStatus, Fail>) -> KramaStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal error");
            KramaStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(fail(KramaStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(KramaStatus::Utf8, format!("{what} is not UTF-8: {e}")))
}

unsafe fn plan_arg<'a>(p: *const KramaPlan) -> Result<&'a PlanDocument, Fail> {
    p.as_ref()
        .map(|h| &h.doc)
        .ok_or_else(|| fail(KramaStatus::NullPointer, "plan is null"))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| fail(KramaStatus::NullPointer, format!("{what} is null")))
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("interior nul removed")
        .into_raw()
}

fn mode(deps: KramaDeps) -> DependencyMode {
    match deps {
        KramaDeps::Inferred => DependencyMode::Inferred,
        KramaDeps::Declared => DependencyMode::Declared,
    }
}

fn plan_error(e: impl ToString) -> Fail {
    fail(KramaStatus::PlanError, e.to_string())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn krama_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn krama_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string produced by this library that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn krama_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses plan text into a new handle stored in `*out`. On a parse error
/// the message carries `line:column`; `line` and `column` receive the
/// position when non-null.
///
/// # Safety
/// `text` must be a NUL-terminated string; the other pointers must be
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn krama_plan_parse(
    text: *const c_char,
    out: *mut *mut KramaPlan,
    line: *mut size_t,
    column: *mut size_t,
) -> KramaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(text, "text")?;
        match parse_plan(text) {
            Ok(doc) => {
                *out = Box::into_raw(Box::new(KramaPlan { doc }));
                Ok(KramaStatus::Ok)
            }
            Err(e) => {
                if let Some(l) = line.as_mut() {
                    *l = e.line;
                }
                if let Some(c) = column.as_mut() {
                    *c = e.column;
                }
                Err(fail(KramaStatus::ParseError, e.to_string()))
            }
        }
    })
}

/// Releases a plan. Null is ignored.
///
/// # Safety
/// `plan` must be null or a handle from `krama_plan_parse` that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn krama_plan_free(plan: *mut KramaPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Canonical text of the plan.
///
/// # Safety
/// `plan` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn krama_plan_format(plan: *const KramaPlan, out: *mut *mut c_char) -> KramaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        *out = to_c(format_plan(plan_arg(plan)?));
        Ok(KramaStatus::Ok)
    })
}

/// The formula of the plan's composition, rendered with ASCII or Unicode
/// connectives.
///
/// # Safety
/// `plan` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn krama_plan_sequence(
    plan: *const KramaPlan,
    unicode: bool,
    out: *mut *mut c_char,
) -> KramaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let (f, _) = plan_arg(plan)?
            .composition_formula(TieBreak::Strict)
            .map_err(plan_error)?;
        let notation = if unicode { Notation::Unicode } else { Notation::Ascii };
        *out = to_c(f.render(notation));
        Ok(KramaStatus::Ok)
    })
}

/// Checks the dependencies along the plan's order. Returns `Ok` for a
/// valid sequence and `Invalid` otherwise.
///
/// # Safety
/// `plan` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn krama_plan_validate(plan: *const KramaPlan, deps: KramaDeps) -> KramaStatus {
    guard(|| {
        let doc = plan_arg(plan)?;
        let (steps, _) = doc.composition_steps(TieBreak::Strict).map_err(plan_error)?;
        let report = validate_sequence(doc, &steps, doc.dependency_rule(mode(deps)));
        if report.valid {
            Ok(KramaStatus::Ok)
        } else {
            let reason = report
                .corollary_reason
                .map_or("invalid sequence".to_string(), |r| format!("{r:?}"));
            Err(fail(KramaStatus::Invalid, reason))
        }
    })
}

/// Evaluates the plan's composition from its initial world.
///
/// # Safety
/// `plan` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn krama_plan_eval(plan: *const KramaPlan, out: *mut KramaEval) -> KramaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let doc = plan_arg(plan)?;
        let (f, _) = doc.composition_formula(TieBreak::Strict).map_err(plan_error)?;
        let trace = eval_formula(&doc.model, &doc.initial_world, &f).map_err(plan_error)?;
        *out = match trace.status {
            EvalStatus::S => KramaEval::Satisfied,
            EvalStatus::V => KramaEval::Violated,
            EvalStatus::N => KramaEval::NotApplicable,
        };
        Ok(KramaStatus::Ok)
    })
}

/// Derives the plan's order and stores the proof text in `*out`. Returns
/// `Invalid` with a null `*out` when no derivation exists.
///
/// # Safety
/// `plan` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn krama_plan_derive(
    plan: *const KramaPlan,
    deps: KramaDeps,
    out: *mut *mut c_char,
) -> KramaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let doc = plan_arg(plan)?;
        let (steps, _) = doc.composition_steps(TieBreak::Strict).map_err(plan_error)?;
        let rule = doc.dependency_rule(mode(deps));
        let proof = derive(doc, &steps, rule).map_err(|f| fail(KramaStatus::Invalid, f.message))?;
        let check = check_derivation(&proof, doc, rule);
        if !check.accepted {
            return Err(fail(KramaStatus::Internal, check.diagnostics.join("; ")));
        }
        *out = to_c(format_proof(&proof));
        Ok(KramaStatus::Ok)
    })
}

/// Runs every ordering of the plan (up to `bound` instructions) and fills
/// `*out`. Returns `Invalid` when any ordering shows a discrepancy.
///
/// # Safety
/// `plan` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn krama_plan_oracle(
    plan: *const KramaPlan,
    deps: KramaDeps,
    bound: size_t,
    out: *mut KramaOracleSummary,
) -> KramaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = KramaOracleSummary::default();
        let opts = OracleOptions {
            bound,
            mode: mode(deps),
            ..OracleOptions::default()
        };
        let report = cross_check(plan_arg(plan)?, &opts).map_err(|e| match e {
            OracleError::TooLarge { .. } => fail(KramaStatus::TooLarge, e.to_string()),
            other => plan_error(other),
        })?;
        *out = KramaOracleSummary {
            permutations: report.permutations,
            executable: report.executable,
            theorem_valid: report.theorem_valid,
            derivable: report.derivable,
            discrepancies: report.discrepancies.len(),
        };
        if report.passed() {
            Ok(KramaStatus::Ok)
        } else {
            Err(fail(
                KramaStatus::Invalid,
                format!("{} discrepancies", report.discrepancies.len()),
            ))
        }
    })
}

/// Runs the command-line tool in process with JSON output. `argv` holds
/// the arguments after the program name. The JSON document goes to
/// `*out` (or clap's message for a usage error) and the process exit code to `*exit_code`.
///
/// # Safety
/// `argv` must point to `argc` NUL-terminated strings; `out` and
/// `exit_code` must be writable.
#[no_mangle]
pub unsafe extern "C" fn krama_run_json(
    argv: *const *const c_char,
    argc: size_t,
    out: *mut *mut c_char,
    exit_code: *mut c_int,
) -> KramaStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let exit_code = out_arg(exit_code, "exit_code")?;
        if argv.is_null() && argc > 0 {
            return Err(fail(KramaStatus::NullPointer, "argv is null"));
        }
        let mut args = vec!["krama".to_string(), "--format".into(), "json".into()];
        for k in 0..argc {
            args.push(str_arg(*argv.add(k), "argument")?.to_string());
        }
        let mut stdout = Vec::new();
        let mut stderr = Vec::new();
        *exit_code = krama::cli::run(args, &mut stdout, &mut stderr);
        if stdout.is_empty() {
            stdout = stderr;
        }
        *out = to_c(String::from_utf8_lossy(&stdout).into_owned());
        Ok(KramaStatus::Ok)
    })
}
