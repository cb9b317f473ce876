use pointnls_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn last_error() -> String {
    unsafe { CStr::from_ptr(pn_last_error()) }.to_string_lossy().into_owned()
}

fn parse(text: &str) -> (PnStatus, *mut PnConfig) {
    let c = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    let st = unsafe { pn_config_parse(c.as_ptr(), 0, &mut cfg) };
    (st, cfg)
}

const SMALL: &str = r#"
n = 256
[study]
epsilons = [0.4, 0.2]
n_base = 256
"#;

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(pn_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_out_pointers_are_rejected() {
    assert_eq!(pn_config_default(ptr::null_mut()), PnStatus::NullPointer);
    assert!(!last_error().is_empty());
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pn_limit_solve(ptr::null(), &mut out) }, PnStatus::NullPointer);
    assert!(out.is_null());
    // freeing null is a no-op
    unsafe {
        pn_config_free(ptr::null_mut());
        pn_charge_free(ptr::null_mut());
        pn_report_free(ptr::null_mut());
        pn_string_free(ptr::null_mut());
    }
}

#[test]
fn bad_configs_map_to_status_codes() {
    let (st, cfg) = parse("gamma = -1.0\nmu = 1.5\n");
    assert_eq!(st, PnStatus::Guard, "{}", last_error());
    assert!(cfg.is_null());
    let (st, _) = parse("no_such_field = 1\n");
    assert_eq!(st, PnStatus::Config);
    let (st, _) = parse("[study]\nepsilons = [-0.1]\n");
    assert_eq!(st, PnStatus::Config);
    let path = CString::new("/nonexistent/pointnls.toml").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { pn_config_load(path.as_ptr(), &mut out) }, PnStatus::Io);
}

#[test]
fn limit_charge_round_trip() {
    let (st, cfg) = parse(SMALL);
    assert_eq!(st, PnStatus::Ok, "{}", last_error());
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { pn_limit_solve(cfg, &mut h) }, PnStatus::Ok, "{}", last_error());
    let len = unsafe { pn_charge_len(h) };
    assert_eq!(len, 257);
    let (mut t, mut re, mut im) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { pn_charge_get(h, 0, &mut t, &mut re, &mut im) }, PnStatus::Ok);
    assert_eq!((t, re, im), (0.0, 1.0, 0.0));
    assert_eq!(unsafe { pn_charge_get(h, len - 1, &mut t, &mut re, &mut im) }, PnStatus::Ok);
    assert!((t - 1.0).abs() < 1e-15);
    assert_eq!(unsafe { pn_charge_get(h, len, &mut t, &mut re, &mut im) }, PnStatus::OutOfRange);
    assert!(unsafe { pn_charge_residual(h) } < 1e-10);
    unsafe {
        pn_charge_free(h);
        pn_config_free(cfg);
    }
}

fn scaled_start(cfg: *const PnConfig, eps: f64) -> f64 {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { pn_scaled_solve(cfg, eps, &mut h) }, PnStatus::Ok, "{}", last_error());
    let (mut t, mut re, mut im) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { pn_charge_get(h, 0, &mut t, &mut re, &mut im) }, PnStatus::Ok);
    unsafe { pn_charge_free(h) };
    assert_eq!(im, 0.0);
    re
}

#[test]
fn scaled_charge_start_approaches_q0() {
    let (_, cfg) = parse(SMALL);
    let (far, near) = (scaled_start(cfg, 0.4) - 1.0, scaled_start(cfg, 0.2) - 1.0);
    assert!(near.abs() < far.abs(), "{far} {near}");
    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { pn_scaled_solve(cfg, -1.0, &mut bad) }, PnStatus::InvalidParameter);
    unsafe { pn_config_free(cfg) };
}

#[test]
fn memory_kernel_closed_form() {
    let mut cfg = ptr::null_mut();
    assert_eq!(pn_config_default(&mut cfg), PnStatus::Ok);
    let (mut re, mut im) = (0.0, 0.0);
    let (eps, t) = (0.2, 0.3);
    assert_eq!(unsafe { pn_memory_kernel(cfg, eps, t, &mut re, &mut im) }, PnStatus::Ok);
    // (4 pi (eps^2 + i t))^{-3/2} for the unit Gaussian
    let z = num_complex::Complex64::new(eps * eps, t) * (4.0 * std::f64::consts::PI);
    let expect = z.powf(-1.5);
    assert!((re - expect.re).abs() < 1e-12 * expect.norm() && (im - expect.im).abs() < 1e-12 * expect.norm());
    assert_eq!(unsafe { pn_memory_kernel(cfg, eps, 0.0, &mut re, &mut im) }, PnStatus::Domain);
    unsafe { pn_config_free(cfg) };
}

#[test]
fn convergence_report_through_the_handle() {
    let (_, cfg) = parse(SMALL);
    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { pn_converge(cfg, &mut rep) }, PnStatus::Ok, "{}", last_error());
    let (mut slope, mut r2) = (0.0, 0.0);
    assert_eq!(unsafe { pn_report_rate(rep, &mut slope, &mut r2) }, PnStatus::Ok);
    assert!(slope.is_finite() && r2.is_finite());
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { pn_report_json(rep, &mut s) }, PnStatus::Ok);
    let text = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["epsilons"].as_array().unwrap().len(), 2);
    unsafe {
        pn_string_free(s);
        pn_report_free(rep);
        pn_config_free(cfg);
    }
}

#[test]
fn selftest_passes() {
    let (mut passed, mut total) = (0, 0);
    assert_eq!(unsafe { pn_selftest(&mut passed, &mut total) }, PnStatus::Ok);
    assert!(total > 0);
    assert_eq!(passed, total);
}

#[test]
fn header_declares_every_entry_point() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/pointnls.h")).unwrap();
    for f in [
        "pn_last_error",
        "pn_version",
        "pn_config_default",
        "pn_config_parse",
        "pn_config_load",
        "pn_config_free",
        "pn_limit_solve",
        "pn_scaled_solve",
        "pn_charge_len",
        "pn_charge_get",
        "pn_charge_residual",
        "pn_charge_free",
        "pn_converge",
        "pn_report_rate",
        "pn_report_json",
        "pn_report_free",
        "pn_string_free",
        "pn_memory_kernel",
        "pn_selftest",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing from header");
    }
}
