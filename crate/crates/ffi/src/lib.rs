// Copyright 2026 The acausal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! C ABI for the `acausal` library.
//!
//! Objects cross the boundary as opaque handles created by `ac_*` constructors
//! and released with the matching `*_free`. Every fallible call returns an
//! [`AcStatus`]; on failure a message is kept per thread and can be read with
//! [`ac_last_error_message`]. Strings returned to the caller are owned by the
//! caller and released with [`ac_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use acausal::neumark::{self, SynthesisResult};
use acausal::process::{self, SeparabilityOptions, SeparabilityStatus};
use acausal::{Error, LabeledOperator};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Panic = 3,
    Parse = 10,
    BadDimension = 11,
    NotHermitian = 12,
    NotPsd = 13,
    InvalidProcessMatrix = 14,
    BadParameter = 15,
    DegenerateProcess = 16,
    NotUnitary = 17,
    NullOutcome = 18,
    Other = 99,
}

/// Separability verdict.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AcSeparability {
    Separable = 0,
    NonSeparable = 1,
    Undecided = 2,
}

/// Opaque labeled operator.
pub struct AcOperator(LabeledOperator);

/// Opaque synthesis result.
pub struct AcSynthesis(SynthesisResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AcStatus {
    match e {
        Error::Parse(_) => AcStatus::Parse,
        Error::BadDimension(_) | Error::LabelCollision(_) | Error::BadPermutation(_) | Error::UnknownLabel(_) => {
            AcStatus::BadDimension
        }
        Error::NotHermitian(_) => AcStatus::NotHermitian,
        Error::NotPsd(_) => AcStatus::NotPsd,
        Error::InvalidProcessMatrix(_) => AcStatus::InvalidProcessMatrix,
        Error::BadParameter(_) => AcStatus::BadParameter,
        Error::DegenerateProcess(_) => AcStatus::DegenerateProcess,
        Error::NotUnitary(_) => AcStatus::NotUnitary,
        Error::NullOutcome { .. } => AcStatus::NullOutcome,
        _ => AcStatus::Other,
    }
}

/// Run `f`, recording errors and panics.
fn guard(f: impl FnOnce() -> Result<(), AcStatus>) -> AcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AcStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            AcStatus::Panic
        }
    }
}

fn lib<T>(r: acausal::Result<T>) -> Result<T, AcStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null<T>(what: &str) -> Result<T, AcStatus> {
    set_error(format!("`{what}` is null"));
    Err(AcStatus::NullPointer)
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, AcStatus> {
    match p.as_ref() {
        Some(r) => Ok(r),
        None => null(what),
    }
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), AcStatus> {
    if out.is_null() {
        return null(what);
    }
    out.write(value);
    Ok(())
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, AcStatus> {
    if s.is_null() {
        return null(what);
    }
    CStr::from_ptr(s).to_str().map_err(|e| {
        set_error(format!("`{what}` is not UTF-8: {e}"));
        AcStatus::InvalidUtf8
    })
}

fn to_c_string(s: String) -> Result<*mut c_char, AcStatus> {
    CString::new(s).map(CString::into_raw).map_err(|e| {
        set_error(e.to_string());
        AcStatus::Other
    })
}

fn boxed_operator(op: LabeledOperator) -> *mut AcOperator {
    Box::into_raw(Box::new(AcOperator(op)))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ac_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ac_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse an operator from its JSON form `{"labels", "re", "im"}`.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ac_operator_from_json(json: *const c_char, out: *mut *mut AcOperator) -> AcStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        let op: LabeledOperator = lib(acausal::json::from_str(text))?;
        write_out(out, boxed_operator(op), "out")
    })
}

/// Serialize an operator; release the result with [`ac_string_free`].
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ac_operator_to_json(op: *const AcOperator, out: *mut *mut c_char) -> AcStatus {
    guard(|| {
        let op = borrow(op, "op")?;
        let s = to_c_string(lib(acausal::json::to_string(&op.0))?)?;
        write_out(out, s, "out")
    })
}

/// Total Hilbert-space dimension of the operator.
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ac_operator_dim(op: *const AcOperator, out: *mut usize) -> AcStatus {
    guard(|| write_out(out, borrow(op, "op")?.0.dim(), "out"))
}

/// # Safety
/// `op` must be null or a live handle, which is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ac_operator_free(op: *mut AcOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// The two-qubit-per-party OCB process matrix.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ac_ocb_process(out: *mut *mut AcOperator) -> AcStatus {
    guard(|| write_out(out, boxed_operator(process::ocb_process().into()), "out"))
}

/// The OCB process mixed with white noise of weight `gamma`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ac_noisy_ocb(gamma: f64, out: *mut *mut AcOperator) -> AcStatus {
    guard(|| {
        let w = lib(process::noisy_ocb(gamma))?;
        write_out(out, boxed_operator(w.into()), "out")
    })
}

/// Check the process-matrix conditions at tolerance `tol`.
///
/// # Safety
/// `op` must be a live handle; `valid` and `forbidden_norm` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ac_process_is_valid(
    op: *const AcOperator,
    tol: f64,
    valid: *mut bool,
    forbidden_norm: *mut f64,
) -> AcStatus {
    guard(|| {
        let rep = lib(process::is_valid(&borrow(op, "op")?.0, tol))?;
        write_out(valid, rep.ok, "valid")?;
        write_out(forbidden_norm, rep.forbidden_term_norm, "forbidden_norm")
    })
}

/// Decide causal separability. `max_iter == 0` keeps the default cap.
///
/// # Safety
/// `op` must be a live handle; `status` and `residual` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ac_process_separability(
    op: *const AcOperator,
    tol: f64,
    max_iter: usize,
    status: *mut AcSeparability,
    residual: *mut f64,
) -> AcStatus {
    guard(|| {
        let mut opts = SeparabilityOptions { tol, ..SeparabilityOptions::default() };
        if max_iter > 0 {
            opts.max_iter = max_iter;
        }
        let v = lib(process::is_causally_separable(&borrow(op, "op")?.0, opts))?;
        let s = match v.status {
            SeparabilityStatus::Separable => AcSeparability::Separable,
            SeparabilityStatus::NonSeparable => AcSeparability::NonSeparable,
            SeparabilityStatus::Undecided => AcSeparability::Undecided,
        };
        write_out(status, s, "status")?;
        write_out(residual, v.residual, "residual")
    })
}

/// Synthesize the conditioned circuit realizing a valid process matrix.
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ac_synthesize(op: *const AcOperator, out: *mut *mut AcSynthesis) -> AcStatus {
    guard(|| {
        let w = lib(process::ProcessMatrix::new(borrow(op, "op")?.0.clone()))?;
        let res = lib(neumark::synthesize(&w))?;
        write_out(out, Box::into_raw(Box::new(AcSynthesis(res))), "out")
    })
}

/// Probability of the success outcome.
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ac_synthesis_p_succ(s: *const AcSynthesis, out: *mut f64) -> AcStatus {
    guard(|| write_out(out, borrow(s, "synthesis")?.0.p_succ, "out"))
}

/// Largest eigenvalue of the synthesized process matrix.
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ac_synthesis_lambda_max(s: *const AcSynthesis, out: *mut f64) -> AcStatus {
    guard(|| write_out(out, borrow(s, "synthesis")?.0.lambda_max, "out"))
}

/// Serialize a synthesis result; release the result with [`ac_string_free`].
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ac_synthesis_to_json(s: *const AcSynthesis, out: *mut *mut c_char) -> AcStatus {
    guard(|| {
        let s = borrow(s, "synthesis")?;
        let text = to_c_string(lib(acausal::json::to_string(&s.0))?)?;
        write_out(out, text, "out")
    })
}

/// # Safety
/// `s` must be null or a live handle, which is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ac_synthesis_free(s: *mut AcSynthesis) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
