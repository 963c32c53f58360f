use std::ffi::{CStr, CString};
use std::ptr;

use chodim_ffi::*;

const CONFIG: &str = r#"{
  "grid": { "spatial_dim": 1, "modes_per_axis": 16, "length_scale": 2.0 },
  "phys": { "alpha": 1.0, "nonlinearity": { "family": "cubic" } },
  "dt": 0.001,
  "initial_amplitude": 0.5
}"#;

fn last_error() -> String {
    unsafe { CStr::from_ptr(chodim_last_error()) }.to_string_lossy().into_owned()
}

fn new_stepper(json: &str, seed: u64) -> (ChodimStatus, *mut ChodimStepper) {
    let c = CString::new(json).unwrap();
    let mut h = ptr::null_mut();
    let s = unsafe { chodim_stepper_new(c.as_ptr(), seed, &mut h) };
    (s, h)
}

#[test]
fn stepper_lifecycle() {
    let (s, h) = new_stepper(CONFIG, 4);
    assert_eq!(s, ChodimStatus::Ok, "{}", last_error());
    assert!(!h.is_null());
    unsafe {
        let (mut e0, mut e1, mut t, mut n) = (0.0, 0.0, 0.0, 0.0);
        assert_eq!(chodim_stepper_energy(h, &mut e0), ChodimStatus::Ok);
        assert_eq!(chodim_stepper_step(h, 500), ChodimStatus::Ok);
        assert_eq!(chodim_stepper_time(h, &mut t), ChodimStatus::Ok);
        assert_eq!(chodim_stepper_energy(h, &mut e1), ChodimStatus::Ok);
        assert_eq!(chodim_stepper_norm(h, &mut n), ChodimStatus::Ok);
        assert!((t - 0.5).abs() < 1e-12);
        // no forcing: the energy only decreases
        assert!(e1 < e0);
        assert!(n > 0.0 && n.is_finite());
        chodim_stepper_free(h);
    }
}

#[test]
fn state_round_trip_is_deterministic() {
    let (_, a) = new_stepper(CONFIG, 9);
    let (_, b) = new_stepper(CONFIG, 1);
    unsafe {
        let len = chodim_stepper_state_len(a);
        assert_eq!(len, 4 * 7);
        let mut buf = vec![0.0; len];
        assert_eq!(chodim_stepper_get_state(a, buf.as_mut_ptr(), len), ChodimStatus::Ok);
        assert_eq!(chodim_stepper_set_state(b, buf.as_ptr(), len), ChodimStatus::Ok);
        chodim_stepper_step(a, 100);
        chodim_stepper_step(b, 100);
        let mut ba = vec![0.0; len];
        let mut bb = vec![0.0; len];
        chodim_stepper_get_state(a, ba.as_mut_ptr(), len);
        chodim_stepper_get_state(b, bb.as_mut_ptr(), len);
        assert_eq!(ba, bb);
        assert_eq!(chodim_stepper_get_state(a, ba.as_mut_ptr(), len - 1), ChodimStatus::InvalidArgument);
        chodim_stepper_free(a);
        chodim_stepper_free(b);
    }
}

#[test]
fn error_codes() {
    let (s, h) = new_stepper(&CONFIG.replace("0.001", "-0.1"), 0);
    assert_eq!(s, ChodimStatus::Config);
    assert!(h.is_null());
    assert!(!last_error().is_empty());
    let (s, _) = new_stepper("{ not json", 0);
    assert_eq!(s, ChodimStatus::Config);
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(chodim_stepper_new(ptr::null(), 0, &mut h), ChodimStatus::NullPointer);
        let mut x = 0.0;
        assert_eq!(chodim_stepper_energy(ptr::null(), &mut x), ChodimStatus::NullPointer);
        assert_eq!(chodim_stepper_step(ptr::null_mut(), 1), ChodimStatus::NullPointer);
        assert_eq!(chodim_stepper_state_len(ptr::null()), 0);
        chodim_stepper_free(ptr::null_mut());
    }
}

#[test]
fn non_finite_state_is_rejected() {
    let (s, h) = new_stepper(CONFIG, 2);
    assert_eq!(s, ChodimStatus::Ok);
    unsafe {
        let len = chodim_stepper_state_len(h);
        let mut buf = vec![0.0; len];
        buf[0] = f64::NAN;
        assert_eq!(chodim_stepper_set_state(h, buf.as_ptr(), len), ChodimStatus::InvalidArgument);
        chodim_stepper_free(h);
    }
}

#[test]
fn omega_and_trace_of_a_diagonal_operator() {
    // diag(3, -1, 0.5), column-major
    let m = [3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.5];
    let mut out = 0.0;
    unsafe {
        assert_eq!(chodim_omega_d(m.as_ptr(), ptr::null(), 3, 2, &mut out), ChodimStatus::Ok);
        assert!((out - 3.0).abs() < 1e-12);
        assert_eq!(chodim_trace_d(m.as_ptr(), ptr::null(), 3, 2, &mut out), ChodimStatus::Ok);
        assert!((out - 3.5).abs() < 1e-12);
        // in the metric diag(4, 1, 1) the operator is similar to itself
        let g = [4.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(chodim_trace_d(m.as_ptr(), g.as_ptr(), 3, 1, &mut out), ChodimStatus::Ok);
        assert!((out - 3.0).abs() < 1e-12);
        assert_eq!(chodim_omega_d(m.as_ptr(), ptr::null(), 3, 4, &mut out), ChodimStatus::InvalidArgument);
        let bad = [-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(chodim_trace_d(m.as_ptr(), bad.as_ptr(), 3, 1, &mut out), ChodimStatus::NotPositiveDefinite);
        assert_eq!(chodim_trace_d(ptr::null(), ptr::null(), 3, 1, &mut out), ChodimStatus::NullPointer);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/chodim.h")).unwrap();
    for sym in [
        "chodim_last_error",
        "chodim_version",
        "chodim_stepper_new",
        "chodim_stepper_free",
        "chodim_stepper_step",
        "chodim_stepper_time",
        "chodim_stepper_energy",
        "chodim_stepper_norm",
        "chodim_stepper_state_len",
        "chodim_stepper_get_state",
        "chodim_stepper_set_state",
        "chodim_omega_d",
        "chodim_trace_d",
        "CHODIM_STATUS_BLOW_UP",
    ] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
    let v = unsafe { CStr::from_ptr(chodim_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
