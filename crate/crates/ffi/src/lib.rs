//! C interface to the `iampc` controller and estimator.
//!
//! Objects are opaque handles created by `*_new`/`*_load` functions and
//! released with the matching `*_free`. Every function returns an
//! [`IampcStatus`]; on failure [`iampc_last_error`] describes the error for
//! the calling thread. Arrays are caller-owned and passed with their length.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use iampc::controller::{Artifacts, ControllerState};
use iampc::estimator::{EstimatorConfig, EstimatorState, Transition};
use iampc::nalgebra::DVector;
use iampc::sim::{build_artifacts, ScenarioConfig};
use iampc::simplex::SimplexVec;
use iampc::{io, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IampcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionMismatch = 3,
    ControllerInfeasible = 4,
    InitialStateOutside = 5,
    AssumptionViolation = 6,
    SetComputation = 7,
    Numerical = 8,
    ArtifactMismatch = 9,
    Io = 10,
    Parse = 11,
    Panic = 12,
}

/// Closed-loop controller with its design artifacts.
pub struct IampcController {
    state: ControllerState,
}

/// Least-squares parameter estimator.
pub struct IampcEstimator {
    state: EstimatorState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> IampcStatus {
    match e.root() {
        Error::DimensionMismatch { .. } => IampcStatus::DimensionMismatch,
        Error::InvalidInput(_) => IampcStatus::InvalidInput,
        Error::ControllerInfeasible { .. } => IampcStatus::ControllerInfeasible,
        Error::InitialStateOutside { .. } => IampcStatus::InitialStateOutside,
        Error::AssumptionViolation { .. } => IampcStatus::AssumptionViolation,
        Error::EmptySet(_)
        | Error::Unbounded(_)
        | Error::RowCap { .. }
        | Error::NonTermination { .. }
        | Error::HorizonNotFound { .. } => IampcStatus::SetComputation,
        Error::ArtifactMismatch(_) => IampcStatus::ArtifactMismatch,
        Error::Io(_) => IampcStatus::Io,
        Error::Parse(_) => IampcStatus::Parse,
        _ => IampcStatus::Numerical,
    }
}

struct Fail(IampcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let mut msg = e.to_string();
        let mut src = std::error::Error::source(&e);
        while let Some(s) = src {
            msg.push_str(": ");
            msg.push_str(&s.to_string());
            src = s.source();
        }
        Fail(status_of(&e), msg)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> IampcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            IampcStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            IampcStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(IampcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(IampcStatus::InvalidInput, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, expected: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != expected {
        return Err(Fail(
            IampcStatus::DimensionMismatch,
            format!("{what}: expected length {expected}, got {len}"),
        ));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a>(p: *mut f64, len: usize, expected: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != expected {
        return Err(Fail(
            IampcStatus::DimensionMismatch,
            format!("{what}: expected length {expected}, got {len}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn simplex(w: &[f64]) -> Result<SimplexVec, Fail> {
    SimplexVec::from_slice(w).map_err(Fail::from)
}

fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call on the same thread.
#[no_mangle]
pub extern "C" fn iampc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn iampc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build a controller by solving the design and set computations for a
/// scenario file, or for the default benchmark scenario if `config_path` is null.
///
/// # Safety
/// `config_path` must be null or a NUL-terminated string; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn iampc_controller_from_config(
    config_path: *const c_char,
    out: *mut *mut IampcController,
) -> IampcStatus {
    guard(|| {
        let cfg = if config_path.is_null() {
            ScenarioConfig::default()
        } else {
            ScenarioConfig::load(&path_arg(config_path, "config_path")?)?
        };
        let artifacts = Arc::new(build_artifacts(&cfg)?);
        put(
            out,
            IampcController {
                state: ControllerState::new(artifacts),
            },
        )
    })
}

/// Load a controller from a model file, a design file and a set-suite
/// directory as written by the `iampc` CLI.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn iampc_controller_load(
    model_path: *const c_char,
    design_path: *const c_char,
    suite_dir: *const c_char,
    out: *mut *mut IampcController,
) -> IampcStatus {
    guard(|| {
        let model = io::read_model(&path_arg(model_path, "model_path")?)?;
        let design = io::read_design(&path_arg(design_path, "design_path")?)?;
        let suite = io::read_suite(&path_arg(suite_dir, "suite_dir")?)?;
        let artifacts = Arc::new(Artifacts::new(model, design, suite)?);
        put(
            out,
            IampcController {
                state: ControllerState::new(artifacts),
            },
        )
    })
}

/// # Safety
/// `ctrl` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn iampc_controller_free(ctrl: *mut IampcController) {
    if !ctrl.is_null() {
        drop(Box::from_raw(ctrl));
    }
}

/// State, input and parameter dimensions and the horizon.
///
/// # Safety
/// `ctrl` must be a live handle; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn iampc_controller_dims(
    ctrl: *const IampcController,
    n: *mut usize,
    m: *mut usize,
    ell: *mut usize,
    horizon: *mut usize,
) -> IampcStatus {
    guard(|| {
        let c = ctrl.as_ref().ok_or_else(|| null("ctrl"))?;
        let a = &c.state.artifacts;
        for (p, v) in [
            (n, a.model.n()),
            (m, a.model.m()),
            (ell, a.model.ell()),
            (horizon, a.horizon()),
        ] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Advance the parameter buffer with `xi` and compute the input for state `x`.
/// `value` receives the optimal cost and may be null. On failure the
/// controller is left unchanged.
///
/// # Safety
/// `ctrl` must be a live handle; arrays must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn iampc_controller_step(
    ctrl: *mut IampcController,
    x: *const f64,
    n: usize,
    xi: *const f64,
    ell: usize,
    u: *mut f64,
    m: usize,
    value: *mut f64,
) -> IampcStatus {
    guard(|| {
        let c = ctrl.as_mut().ok_or_else(|| null("ctrl"))?;
        let model = &c.state.artifacts.model;
        let x = slice_arg(x, n, model.n(), "x")?;
        let xi = simplex(slice_arg(xi, ell, model.ell(), "xi")?)?;
        let u_out = slice_out(u, m, model.m(), "u")?;
        let (u_new, diag) = c.state.control_step(&DVector::from_column_slice(x), xi)?;
        u_out.copy_from_slice(u_new.as_slice());
        if !value.is_null() {
            *value = diag.value;
        }
        Ok(())
    })
}

/// Optimal cost at `x` for the current buffer, without advancing it.
///
/// # Safety
/// `ctrl` must be a live handle; `x` must hold `n` values and `value` be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn iampc_controller_value(
    ctrl: *const IampcController,
    x: *const f64,
    n: usize,
    value: *mut f64,
) -> IampcStatus {
    guard(|| {
        let c = ctrl.as_ref().ok_or_else(|| null("ctrl"))?;
        let x = slice_arg(x, n, c.state.artifacts.model.n(), "x")?;
        if value.is_null() {
            return Err(null("value"));
        }
        *value = c.state.value_of(&DVector::from_column_slice(x))?;
        Ok(())
    })
}

/// Estimator for the controller's model, starting from the uniform weights.
///
/// # Safety
/// `ctrl` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn iampc_estimator_new(
    ctrl: *const IampcController,
    window: usize,
    gain: f64,
    ridge: f64,
    out: *mut *mut IampcEstimator,
) -> IampcStatus {
    guard(|| {
        let c = ctrl.as_ref().ok_or_else(|| null("ctrl"))?;
        let config = EstimatorConfig { window, gain, ridge };
        let state = EstimatorState::new(c.state.artifacts.model.ell(), config)?;
        put(out, IampcEstimator { state })
    })
}

/// # Safety
/// `est` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn iampc_estimator_free(est: *mut IampcEstimator) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Feed one observed transition and write the new estimate to `xi`.
///
/// # Safety
/// Handles must be live; arrays must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn iampc_estimator_step(
    est: *mut IampcEstimator,
    ctrl: *const IampcController,
    x_prev: *const f64,
    u_prev: *const f64,
    x_next: *const f64,
    xi: *mut f64,
    ell: usize,
) -> IampcStatus {
    guard(|| {
        let e = est.as_mut().ok_or_else(|| null("est"))?;
        let c = ctrl.as_ref().ok_or_else(|| null("ctrl"))?;
        let model = &c.state.artifacts.model;
        let (n, m) = (model.n(), model.m());
        let transition = Transition {
            x_prev: DVector::from_column_slice(slice_arg(x_prev, n, n, "x_prev")?),
            u_prev: DVector::from_column_slice(slice_arg(u_prev, m, m, "u_prev")?),
            x_next: DVector::from_column_slice(slice_arg(x_next, n, n, "x_next")?),
        };
        let xi_out = slice_out(xi, ell, model.ell(), "xi")?;
        let w = e.state.step(transition, model)?;
        xi_out.copy_from_slice(w.as_slice());
        Ok(())
    })
}

/// Current estimate without feeding data.
///
/// # Safety
/// `est` must be a live handle; `xi` must hold `ell` values.
#[no_mangle]
pub unsafe extern "C" fn iampc_estimator_current(est: *const IampcEstimator, xi: *mut f64, ell: usize) -> IampcStatus {
    guard(|| {
        let e = est.as_ref().ok_or_else(|| null("est"))?;
        let out = slice_out(xi, ell, e.state.xi.len(), "xi")?;
        out.copy_from_slice(e.state.xi.as_slice());
        Ok(())
    })
}
