use std::ffi::{CStr, CString};
use std::ptr;

use finslerlab_ffi::*;

fn cstrs(items: &[&str]) -> (Vec<CString>, Vec<*const std::ffi::c_char>) {
    let owned: Vec<CString> = items.iter().map(|s| CString::new(*s).unwrap()).collect();
    let ptrs = owned.iter().map(|s| s.as_ptr()).collect();
    (owned, ptrs)
}

fn last_error() -> String {
    let p = fl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn rotation() -> *mut FlMetric {
    let (u, v, b) = (CString::new("-x2").unwrap(), CString::new("x1").unwrap(), CString::new("x1^2+x2^2").unwrap());
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { fl_metric_sqrt2d(u.as_ptr(), v.as_ptr(), b.as_ptr(), &mut m) }, FlStatus::Ok);
    assert!(!m.is_null());
    m
}

#[test]
fn rotation_metric_matches_closed_form() {
    let m = rotation();
    let x = [0.6, 0.0];
    let y = [0.0, 1.0];
    let u = [1.0, 0.0];
    let mut lambda = 0.0;
    let mut k = 0.0;
    let mut f = 0.0;
    unsafe {
        assert_eq!(fl_metric_dim(m), 2);
        assert_eq!(fl_metric_value(m, x.as_ptr(), y.as_ptr(), &mut f), FlStatus::Ok);
        assert_eq!(fl_metric_einstein_scalar(m, x.as_ptr(), y.as_ptr(), &mut lambda), FlStatus::Ok);
        assert_eq!(fl_metric_flag_curvature(m, x.as_ptr(), y.as_ptr(), u.as_ptr(), &mut k), FlStatus::Ok);
        fl_metric_free(m);
    }
    // F = alpha + beta with alpha = 0.6/0.64^0.75 |y| / 0.6 and beta = 0.36/0.64^0.75 y2 / 0.6
    let alpha = 0.6_f64 / 0.64_f64.powf(0.75) / 0.6;
    let beta = 0.36 / 0.64_f64.powf(0.75) / 0.6;
    assert!((f - (alpha * (alpha + beta)).sqrt()).abs() < 1e-12);
    assert!((lambda + 1.25).abs() < 1e-9, "{lambda}");
    assert!((k + 1.25).abs() < 1e-9, "{k}");
}

#[test]
fn ppower_spray_of_flat_constant_form_vanishes() {
    let (_a, a) = cstrs(&["1", "0", "0", "1"]);
    let (_b, b) = cstrs(&["0.2", "0.1"]);
    let mut m = ptr::null_mut();
    let mut g = [1.0; 2];
    let mut ric = 1.0;
    unsafe {
        assert_eq!(fl_metric_ppower(2, a.as_ptr(), b.as_ptr(), 2.0, &mut m), FlStatus::Ok);
        assert_eq!(fl_metric_spray(m, [0.3, 0.4].as_ptr(), [1.0, -0.5].as_ptr(), g.as_mut_ptr()), FlStatus::Ok);
        assert_eq!(fl_metric_ricci(m, [0.3, 0.4].as_ptr(), [1.0, -0.5].as_ptr(), &mut ric), FlStatus::Ok);
        fl_metric_free(m);
    }
    assert!(g.iter().all(|v| v.abs() < 1e-14));
    assert!(ric.abs() < 1e-12);
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut m = ptr::null_mut();
    let bad = CString::new("x1 +").unwrap();
    let ok = CString::new("x1").unwrap();
    unsafe {
        assert_eq!(fl_metric_sqrt2d(bad.as_ptr(), ok.as_ptr(), ok.as_ptr(), &mut m), FlStatus::Parse);
        assert!(m.is_null());
        assert!(last_error().contains("byte"));
        assert_eq!(fl_metric_sqrt2d(ptr::null(), ok.as_ptr(), ok.as_ptr(), &mut m), FlStatus::NullPointer);
        let mut out = 0.0;
        assert_eq!(fl_metric_value(ptr::null(), [0.0].as_ptr(), [0.0].as_ptr(), &mut out), FlStatus::NullPointer);
        assert_eq!(fl_metric_dim(ptr::null()), 0);

        let (_a, a) = cstrs(&["1", "0", "0", "1"]);
        let (_b, b) = cstrs(&["0", "0"]);
        assert_eq!(fl_metric_ppower(2, a.as_ptr(), b.as_ptr(), 0.0, &mut m), FlStatus::InvalidArgument);
        assert_eq!(fl_metric_ppower(9, a.as_ptr(), b.as_ptr(), 1.0, &mut m), FlStatus::InvalidArgument);
        let (_a, asym) = cstrs(&["1", "x1", "0", "1"]);
        assert_ne!(fl_metric_ppower(2, asym.as_ptr(), b.as_ptr(), 1.0, &mut m), FlStatus::Ok);
    }
}

#[test]
fn singular_sample_reports_domain() {
    let m = rotation();
    let mut out = 0.0;
    unsafe {
        // B = 1.44 lies outside (0, 1)
        let s = fl_metric_einstein_scalar(m, [1.2, 0.0].as_ptr(), [0.0, 1.0].as_ptr(), &mut out);
        assert_eq!(s, FlStatus::Domain, "{}", last_error());
        let s = fl_metric_einstein_scalar(m, [0.5, 0.0].as_ptr(), [0.0, 0.0].as_ptr(), &mut out);
        assert_eq!(s, FlStatus::Domain);
        fl_metric_free(m);
    }
    assert_eq!(out, 0.0);
}

#[test]
fn success_clears_last_error() {
    let mut m = ptr::null_mut();
    let bad = CString::new("(").unwrap();
    unsafe {
        fl_metric_sqrt2d(bad.as_ptr(), bad.as_ptr(), bad.as_ptr(), &mut m);
    }
    assert!(!fl_last_error_message().is_null());
    let m = rotation();
    assert!(fl_last_error_message().is_null());
    unsafe { fl_metric_free(m) };
}

#[test]
fn manifest_round_trip() {
    let text = CString::new(
        r#"{"dimension": 2, "metric": {"kind": "sqrt2d_family", "u": "-x2", "v": "x1", "B": "x1^2+x2^2"},
            "samples": {"points": [[0.6, 0.0]], "directions": 4}, "checks": ["einstein"]}"#,
    )
    .unwrap();
    let mut json = ptr::null_mut();
    let mut verdict = -1;
    unsafe {
        assert_eq!(fl_run_manifest(text.as_ptr(), &mut json, &mut verdict), FlStatus::Ok);
        let s = CStr::from_ptr(json).to_str().unwrap().to_string();
        fl_string_free(json);
        assert!(s.contains("\"manifest_sha256\""));
    }
    assert_eq!(verdict, 1);
    let bad = CString::new(r#"{"dimension": 9}"#).unwrap();
    let s = unsafe { fl_run_manifest(bad.as_ptr(), &mut json, &mut verdict) };
    assert_eq!(s, FlStatus::Manifest);
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(fl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
