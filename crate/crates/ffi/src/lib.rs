//! C ABI over the reduction pipeline.
//!
//! Objects are opaque handles created by `*_new`/`*_from_*` calls and released
//! with the matching `*_free`. Every call returns an [`S2bStatus`]; on failure
//! `s2b_last_error` describes what went wrong on the calling thread. Strings
//! handed out by the library must be released with `s2b_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sat2binpack::binpack::{BinPackError, ChiGuess, ChiMode};
use sat2binpack::cnf::{parse_dimacs, CnfFormula};
use sat2binpack::ilp::enumerate_solutions;
use sat2binpack::{end_to_end, Nat, PipelineError, Reduction, Report, SolveOptions};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum S2bStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ReductionError = 4,
    VerifyError = 5,
    InvalidArgument = 6,
    InfeasibleGuess = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum S2bChiMode {
    Full = 0,
    Reduced = 1,
}

/// Parsed CNF formula.
pub struct S2bFormula(CnfFormula);

/// Reduction of one formula: equality system, aggregated equation and
/// instance family.
pub struct S2bReduction(Reduction);

/// Outcome of an end-to-end run.
pub struct S2bReport(Report);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Failure = (S2bStatus, String);

fn pipeline(e: PipelineError) -> Failure {
    let status = match &e {
        PipelineError::Cnf(_) => S2bStatus::ParseError,
        PipelineError::Encode(_) | PipelineError::GuardExceeded { .. } => S2bStatus::InvalidArgument,
        PipelineError::Ilp(_) | PipelineError::Aggregate(_) | PipelineError::BinPack(_) => S2bStatus::ReductionError,
        PipelineError::Witness(_) | PipelineError::Pool(_) => S2bStatus::VerifyError,
    };
    (status, e.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> S2bStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => S2bStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            S2bStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| (S2bStatus::NullPointer, format!("{what} is null")))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err((S2bStatus::NullPointer, "output pointer is null".into()));
    }
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("library strings contain no nul bytes").into_raw()
}

/// Message for the most recent failure on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn s2b_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn s2b_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses DIMACS CNF text.
///
/// # Safety
/// `text` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s2b_formula_from_dimacs(text: *const c_char, out: *mut *mut S2bFormula) -> S2bStatus {
    guard(|| {
        if text.is_null() {
            return Err((S2bStatus::NullPointer, "text is null".into()));
        }
        let s = CStr::from_ptr(text).to_str().map_err(|e| (S2bStatus::InvalidUtf8, e.to_string()))?;
        let f = parse_dimacs(s).map_err(|e| (S2bStatus::ParseError, e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(S2bFormula(f))))
    })
}

/// # Safety
/// `f` must be null or a handle from `s2b_formula_from_dimacs`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn s2b_formula_free(f: *mut S2bFormula) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// # Safety
/// `f` must be a live formula handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s2b_formula_num_vars(f: *const S2bFormula, out: *mut usize) -> S2bStatus {
    guard(|| write_out(out, deref(f, "formula")?.0.num_vars()))
}

/// # Safety
/// `f` must be a live formula handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s2b_formula_num_clauses(f: *const S2bFormula, out: *mut usize) -> S2bStatus {
    guard(|| write_out(out, deref(f, "formula")?.0.num_clauses()))
}

/// Normalizes the formula and builds every stage. `gamma = 0` picks the
/// default base `4n + 1`.
///
/// # Safety
/// `f` must be a live formula handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s2b_reduction_new(
    f: *const S2bFormula,
    gamma: u64,
    out: *mut *mut S2bReduction,
) -> S2bStatus {
    guard(|| {
        let f = deref(f, "formula")?;
        let gamma = (gamma != 0).then(|| Nat::from(gamma));
        let red = Reduction::from_formula(&f.0, gamma).map_err(pipeline)?;
        write_out(out, Box::into_raw(Box::new(S2bReduction(red))))
    })
}

/// # Safety
/// `r` must be null or a handle from `s2b_reduction_new`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn s2b_reduction_free(r: *mut S2bReduction) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

unsafe fn reduction_count(r: *const S2bReduction, out: *mut usize, f: impl FnOnce(&Reduction) -> usize) -> S2bStatus {
    guard(|| write_out(out, f(&deref(r, "reduction")?.0)))
}

/// Variables after normalization.
///
/// # Safety
/// `r` must be a live reduction handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s2b_reduction_num_vars(r: *const S2bReduction, out: *mut usize) -> S2bStatus {
    reduction_count(r, out, |r| r.n())
}

/// Clauses after normalization.
///
/// # Safety
/// `r` must be a live reduction handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s2b_reduction_num_clauses(r: *const S2bReduction, out: *mut usize) -> S2bStatus {
    reduction_count(r, out, |r| r.m())
}

/// Rows of the equality system.
///
/// # Safety
/// `r` must be a live reduction handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s2b_reduction_ilp_rows(r: *const S2bReduction, out: *mut usize) -> S2bStatus {
    reduction_count(r, out, |r| r.sys.num_rows())
}

/// Variables of the equality system.
///
/// # Safety
/// `r` must be a live reduction handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s2b_reduction_ilp_vars(r: *const S2bReduction, out: *mut usize) -> S2bStatus {
    reduction_count(r, out, |r| r.sys.num_vars())
}

/// Item types of every instance in the family.
///
/// # Safety
/// `r` must be a live reduction handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s2b_reduction_item_types(r: *const S2bReduction, out: *mut usize) -> S2bStatus {
    reduction_count(r, out, |r| r.item_types())
}

/// Enumerates the equality system and reports how many solutions it has.
///
/// # Safety
/// `r` must be a live reduction handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s2b_reduction_count_solutions(r: *const S2bReduction, out: *mut usize) -> S2bStatus {
    guard(|| {
        let r = &deref(r, "reduction")?.0;
        let sols = enumerate_solutions(&r.sys, &r.ctx).map_err(|e| pipeline(e.into()))?;
        write_out(out, sols.len())
    })
}

/// Text form of the instance for guess `chi[0..4]`: a header line
/// `D capacity bins`, then one `size multiplicity` line per item type.
///
/// # Safety
/// `r` must be a live reduction handle, `chi` must point to four values and
/// `out` must be writable. Free the string with `s2b_string_free`.
#[no_mangle]
pub unsafe extern "C" fn s2b_reduction_instance_text(
    r: *const S2bReduction,
    chi: *const u32,
    out: *mut *mut c_char,
) -> S2bStatus {
    guard(|| {
        let r = &deref(r, "reduction")?.0;
        if chi.is_null() {
            return Err((S2bStatus::NullPointer, "chi is null".into()));
        }
        let guess = ChiGuess([*chi, *chi.add(1), *chi.add(2), *chi.add(3)]);
        let inst = r.instance(guess).map_err(|e| match e {
            BinPackError::InfeasibleGuess { .. } | BinPackError::ClauseSurplus { .. } => {
                (S2bStatus::InfeasibleGuess, e.to_string())
            }
            _ => (S2bStatus::ReductionError, e.to_string()),
        })?;
        write_out(out, into_c_string(inst.to_text()))
    })
}

/// Runs the full pipeline and cross-checks it against brute force.
///
/// # Safety
/// `f` must be a live formula handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s2b_solve(
    f: *const S2bFormula,
    mode: S2bChiMode,
    jobs: u32,
    out: *mut *mut S2bReport,
) -> S2bStatus {
    guard(|| {
        let f = deref(f, "formula")?;
        let chi_mode = match mode {
            S2bChiMode::Full => ChiMode::Full,
            S2bChiMode::Reduced => ChiMode::Reduced,
        };
        let opts = SolveOptions { chi_mode, gamma: None, jobs: jobs.max(1) as usize };
        let report = end_to_end(&f.0, opts).map_err(pipeline)?;
        write_out(out, Box::into_raw(Box::new(S2bReport(report))))
    })
}

/// # Safety
/// `r` must be null or a handle from `s2b_solve`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn s2b_report_free(r: *mut S2bReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `r` must be a live report handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s2b_report_sat(r: *const S2bReport, out: *mut bool) -> S2bStatus {
    guard(|| write_out(out, deref(r, "report")?.0.sat_answer))
}

/// # Safety
/// `r` must be a live report handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s2b_report_bp(r: *const S2bReport, out: *mut bool) -> S2bStatus {
    guard(|| write_out(out, deref(r, "report")?.0.bp_answer))
}

/// # Safety
/// `r` must be a live report handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s2b_report_agreement(r: *const S2bReport, out: *mut bool) -> S2bStatus {
    guard(|| write_out(out, deref(r, "report")?.0.agreement))
}

/// # Safety
/// `r` must be a live report handle; `out` must be writable. Free the string
/// with `s2b_string_free`.
#[no_mangle]
pub unsafe extern "C" fn s2b_report_to_json(r: *const S2bReport, out: *mut *mut c_char) -> S2bStatus {
    guard(|| write_out(out, into_c_string(deref(r, "report")?.0.to_json())))
}
