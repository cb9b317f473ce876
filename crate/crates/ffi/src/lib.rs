//! C interface. Objects are opaque handles created by `pn_*_new`/`pn_*_solve` style calls and
//! released by the matching `*_free`. Every fallible call returns a `PnStatus`; on failure the
//! message is available from `pn_last_error` on the same thread.

use pointnls::config::Config;
use pointnls::harness::{run_convergence_study, ConvergenceReport};
use pointnls::kernels::SmearedKernels;
use pointnls::limit::{solve_limit_charge, ChargeTrajectory};
use pointnls::scaled::run_scaled;
use pointnls::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Domain = 3,
    Guard = 4,
    Convergence = 5,
    Config = 6,
    Io = 7,
    OutOfRange = 8,
    Panic = 9,
}

pub struct PnConfig(Config);
pub struct PnCharge(ChargeTrajectory);
pub struct PnReport(ConvergenceReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PnStatus {
    match e {
        Error::InvalidParameter(_) | Error::Parse(_) => PnStatus::InvalidParameter,
        Error::Domain(_) | Error::NotSquareIntegrable(_) | Error::NonIntegrableTail(_) | Error::BoundaryCondition { .. } => {
            PnStatus::Domain
        }
        Error::ExistenceGuard { .. } => PnStatus::Guard,
        Error::StepFailure { .. } => PnStatus::Convergence,
        Error::Config(_) => PnStatus::Config,
        Error::Io(_) => PnStatus::Io,
    }
}

/// Runs `f`, turning errors and panics into a status plus the thread's last-error message.
fn guard<F: FnOnce() -> Result<(), (PnStatus, String)>>(f: F) -> PnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PnStatus::Ok
        }
        Ok(Err((s, m))) => {
            set_error(&m);
            s
        }
        Err(_) => {
            set_error("internal panic");
            PnStatus::Panic
        }
    }
}

fn lib<T>(r: pointnls::Result<T>) -> Result<T, (PnStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (PnStatus, String) {
    (PnStatus::NullPointer, format!("{what} is null"))
}

unsafe fn cstr<'a>(p: *const c_char, what: &str) -> Result<&'a str, (PnStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (PnStatus::InvalidParameter, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread; empty after a success. Owned by the library,
/// valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn pn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static string.
#[no_mangle]
pub extern "C" fn pn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Default configuration.
#[no_mangle]
pub extern "C" fn pn_config_default(out: *mut *mut PnConfig) -> PnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        unsafe { *out = Box::into_raw(Box::new(PnConfig(Config::default()))) };
        Ok(())
    })
}

/// Parses a configuration from TOML (`json == 0`) or JSON text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pn_config_parse(text: *const c_char, json: i32, out: *mut *mut PnConfig) -> PnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t = cstr(text, "text")?;
        let cfg = lib(Config::parse(t, json != 0))?;
        *out = Box::into_raw(Box::new(PnConfig(cfg)));
        Ok(())
    })
}

/// Reads a configuration file; `.json` is JSON, anything else TOML.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pn_config_load(path: *const c_char, out: *mut *mut PnConfig) -> PnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = cstr(path, "path")?;
        let cfg = lib(Config::load(std::path::Path::new(p)))?;
        *out = Box::into_raw(Box::new(PnConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from a `pn_config_*` constructor, or be null.
#[no_mangle]
pub unsafe extern "C" fn pn_config_free(cfg: *mut PnConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

fn charge_out(out: *mut *mut PnCharge, traj: ChargeTrajectory) {
    unsafe { *out = Box::into_raw(Box::new(PnCharge(traj))) };
}

/// Solves the point-interaction charge equation on the configured time grid.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pn_limit_solve(cfg: *const PnConfig, out: *mut *mut PnCharge) -> PnStatus {
    guard(|| {
        if cfg.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let c = &(*cfg).0;
        let ff = lib(c.form_factor())?;
        let params = lib(c.k_grid(&ff).and_then(|g| c.params(g)))?;
        let traj = lib(c.time_grid().and_then(|g| solve_limit_charge(&params, g)))?;
        charge_out(out, traj);
        Ok(())
    })
}

/// Solves the smeared-interaction charge equation at `eps` on the configured time grid.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pn_scaled_solve(cfg: *const PnConfig, eps: f64, out: *mut *mut PnCharge) -> PnStatus {
    guard(|| {
        if cfg.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let c = &(*cfg).0;
        let ff = lib(c.form_factor())?;
        let params = lib(c.k_grid(&ff).and_then(|g| c.params(g)))?;
        let run = lib(c.time_grid().and_then(|g| run_scaled(&params, &ff, eps, g)))?;
        charge_out(out, run.q_traj);
        Ok(())
    })
}

/// Number of nodes (time steps + 1).
///
/// # Safety
/// `h` must be a live handle or null (gives 0).
#[no_mangle]
pub unsafe extern "C" fn pn_charge_len(h: *const PnCharge) -> usize {
    if h.is_null() {
        0
    } else {
        (*h).0.values.len()
    }
}

/// Node `i`: time and charge.
///
/// # Safety
/// `h` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn pn_charge_get(h: *const PnCharge, i: usize, t: *mut f64, re: *mut f64, im: *mut f64) -> PnStatus {
    guard(|| {
        if h.is_null() || t.is_null() || re.is_null() || im.is_null() {
            return Err(null("argument"));
        }
        let tr = &(*h).0;
        let q = *tr.values.get(i).ok_or((PnStatus::OutOfRange, format!("node {i} of {}", tr.values.len())))?;
        *t = tr.grid.node(i);
        *re = q.re;
        *im = q.im;
        Ok(())
    })
}

/// Largest residual of the discrete equation the charge was solved from.
///
/// # Safety
/// `h` must be a live handle or null (gives NaN).
#[no_mangle]
pub unsafe extern "C" fn pn_charge_residual(h: *const PnCharge) -> f64 {
    if h.is_null() {
        f64::NAN
    } else {
        (*h).0.residual
    }
}

/// # Safety
/// `h` must come from a solve call, or be null.
#[no_mangle]
pub unsafe extern "C" fn pn_charge_free(h: *mut PnCharge) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Runs the eps sweep of the configuration.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pn_converge(cfg: *const PnConfig, out: *mut *mut PnReport) -> PnStatus {
    guard(|| {
        if cfg.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let r = lib(run_convergence_study(&(*cfg).0))?;
        *out = Box::into_raw(Box::new(PnReport(r)));
        Ok(())
    })
}

/// Fitted sup-error rate and its R^2; NaN when the sweep was partial.
///
/// # Safety
/// `h` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn pn_report_rate(h: *const PnReport, slope: *mut f64, r_squared: *mut f64) -> PnStatus {
    guard(|| {
        if h.is_null() || slope.is_null() || r_squared.is_null() {
            return Err(null("argument"));
        }
        let (s, r) = match &(*h).0.fitted_rates {
            Some(f) => (f.delta_hat.slope, f.delta_hat.r_squared),
            None => (f64::NAN, f64::NAN),
        };
        *slope = s;
        *r_squared = r;
        Ok(())
    })
}

/// The report as JSON. Release with `pn_string_free`.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pn_report_json(h: *const PnReport, out: *mut *mut c_char) -> PnStatus {
    guard(|| {
        if h.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let s = lib(serde_json::to_string(&(*h).0).map_err(Error::from))?;
        *out = CString::new(s).map_err(|e| (PnStatus::InvalidParameter, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `h` must come from `pn_converge`, or be null.
#[no_mangle]
pub unsafe extern "C" fn pn_report_free(h: *mut PnReport) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `s` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn pn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Memory kernel (rho_eps, U(t) rho_eps) of the configured form factor.
///
/// # Safety
/// `cfg` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn pn_memory_kernel(cfg: *const PnConfig, eps: f64, t: f64, re: *mut f64, im: *mut f64) -> PnStatus {
    guard(|| {
        if cfg.is_null() || re.is_null() || im.is_null() {
            return Err(null("argument"));
        }
        if !(t > 0.0) {
            return Err((PnStatus::Domain, format!("kernel needs t > 0, got {t}")));
        }
        let ff = lib((*cfg).0.form_factor())?;
        let k = lib(SmearedKernels::new(&ff, eps))?.memory(t);
        *re = k.re;
        *im = k.im;
        Ok(())
    })
}

/// Runs the quick invariant checks. Returns Ok only if all pass.
///
/// # Safety
/// Out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn pn_selftest(passed: *mut usize, total: *mut usize) -> PnStatus {
    guard(|| {
        let checks = pointnls::selftest::run_all();
        let ok = checks.iter().filter(|c| c.pass).count();
        if !passed.is_null() {
            *passed = ok;
        }
        if !total.is_null() {
            *total = checks.len();
        }
        if ok < checks.len() {
            let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
            return Err((PnStatus::Convergence, format!("failed: {}", failed.join(", "))));
        }
        Ok(())
    })
}
