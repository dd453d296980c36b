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

use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use acausal_ffi::*;

fn last_error() -> String {
    let p = ac_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn ocb_round_trip_and_checks() {
    unsafe {
        let mut w = ptr::null_mut();
        assert_eq!(ac_ocb_process(&mut w), AcStatus::Ok);
        let mut dim = 0;
        assert_eq!(ac_operator_dim(w, &mut dim), AcStatus::Ok);
        assert_eq!(dim, 16);

        let mut valid = false;
        let mut forbidden = f64::NAN;
        assert_eq!(ac_process_is_valid(w, 1e-9, &mut valid, &mut forbidden), AcStatus::Ok);
        assert!(valid);
        assert!(forbidden < 1e-12);

        let mut status = AcSeparability::Undecided;
        let mut residual = f64::NAN;
        assert_eq!(ac_process_separability(w, 1e-7, 0, &mut status, &mut residual), AcStatus::Ok);
        assert_eq!(status, AcSeparability::NonSeparable);

        let mut text = ptr::null_mut();
        assert_eq!(ac_operator_to_json(w, &mut text), AcStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(ac_operator_from_json(text, &mut back), AcStatus::Ok);
        let mut dim2 = 0;
        ac_operator_dim(back, &mut dim2);
        assert_eq!(dim2, 16);
        ac_string_free(text);
        ac_operator_free(back);
        ac_operator_free(w);
    }
}

#[test]
fn synthesis_of_ocb() {
    unsafe {
        let mut w = ptr::null_mut();
        ac_ocb_process(&mut w);
        let mut s = ptr::null_mut();
        assert_eq!(ac_synthesize(w, &mut s), AcStatus::Ok);
        let (mut p, mut l) = (0.0, 0.0);
        ac_synthesis_p_succ(s, &mut p);
        ac_synthesis_lambda_max(s, &mut l);
        assert!((p - 0.5).abs() < 1e-12);
        assert!((l - 0.5).abs() < 1e-12);
        let mut text = ptr::null_mut();
        assert_eq!(ac_synthesis_to_json(s, &mut text), AcStatus::Ok);
        assert!(CStr::from_ptr(text).to_str().unwrap().contains("p_succ"));
        ac_string_free(text);
        ac_synthesis_free(s);
        ac_operator_free(w);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut w = ptr::null_mut();
        assert_eq!(ac_noisy_ocb(-1.0, &mut w), AcStatus::BadParameter);
        assert!(w.is_null());
        assert!(last_error().contains("noise"));

        let bad = CString::new("{\"labels\": 3}").unwrap();
        assert_eq!(ac_operator_from_json(bad.as_ptr(), &mut w), AcStatus::Parse);

        assert_eq!(ac_operator_dim(ptr::null(), ptr::null_mut()), AcStatus::NullPointer);
        assert!(last_error().contains("op"));

        let mut valid = false;
        ac_ocb_process(&mut w);
        assert_eq!(ac_process_is_valid(w, 1e-9, &mut valid, ptr::null_mut()), AcStatus::NullPointer);
        ac_operator_free(w);

        ac_operator_free(ptr::null_mut());
        ac_synthesis_free(ptr::null_mut());
        ac_string_free(ptr::null_mut());
    }
}

#[test]
fn invalid_process_is_rejected_by_synthesis() {
    unsafe {
        let json =
            CString::new(r#"{"labels":[{"name":"A1","dim":2}],"re":[[1.0,0.0],[0.0,0.0]],"im":[[0.0,0.0],[0.0,0.0]]}"#).unwrap();
        let mut op = ptr::null_mut();
        assert_eq!(ac_operator_from_json(json.as_ptr(), &mut op), AcStatus::Ok);
        let mut s = ptr::null_mut();
        let st = ac_synthesize(op, &mut s);
        assert_ne!(st, AcStatus::Ok);
        assert!(s.is_null());
        ac_operator_free(op);
    }
}

#[test]
fn c_program_links_against_header() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler, skipping");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let test_exe = std::env::current_exe().unwrap();
    let deps = test_exe.parent().unwrap();
    let lib_dir = deps.parent().unwrap();
    let staticlib = lib_dir.join("libacausal_ffi.a");
    if !staticlib.exists() {
        eprintln!("static library not built, skipping");
        return;
    }
    let exe = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acausal_smoke");
    let status = Command::new(&cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&staticlib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C smoke test failed to compile");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C smoke test exited with {:?}", out.status);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "p_succ=0.500");
}
