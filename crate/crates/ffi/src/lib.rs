//! C ABI over the chodim solver and the volume-contraction primitives.
//!
//! Every fallible function returns a [`ChodimStatus`]; on failure the message
//! is available from [`chodim_last_error`] on the same thread. Matrices are
//! dense, column-major, `n × n`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use chodim::cho_model::{random_state, ChoModel, GridSpec, PhysParams, State, Stepper};
use chodim::multilinear::{omega_d, trace_d, DenseOperator, InnerProduct};
use chodim::Error;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Deserialize;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChodimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    DegenerateFrame = 4,
    NotPositiveDefinite = 5,
    BlowUp = 6,
    Io = 7,
    Internal = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> ChodimStatus {
    match e {
        Error::DimensionMismatch { .. } | Error::InvalidArgument(_) | Error::NonZeroMean { .. } => ChodimStatus::InvalidArgument,
        Error::DegenerateFrame { .. } => ChodimStatus::DegenerateFrame,
        Error::NotPositiveDefinite { .. } => ChodimStatus::NotPositiveDefinite,
        Error::BlowUp { .. } => ChodimStatus::BlowUp,
        Error::Io(_) => ChodimStatus::Io,
        Error::Config(_) | Error::Json(_) | Error::CutoffTooLarge { .. } | Error::TooFewSamples { .. } => ChodimStatus::Config,
        Error::SplittingViolated { .. } => ChodimStatus::Internal,
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (ChodimStatus, String)>) -> ChodimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ChodimStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ChodimStatus::Internal
        }
    }
}

fn from_lib(e: Error) -> (ChodimStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (ChodimStatus, String) {
    (ChodimStatus::NullPointer, format!("{what} is null"))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn chodim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn chodim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StepperConfig {
    grid: GridSpec,
    phys: PhysParams,
    dt: f64,
    #[serde(default = "default_amplitude")]
    initial_amplitude: f64,
}

/// Opaque integrator handle owning the current state and time.
pub struct ChodimStepper {
    stepper: Stepper,
    state: State,
    time: f64,
}

impl ChodimStepper {
    fn model(&self) -> &Arc<ChoModel> {
        self.stepper.model()
    }
}

unsafe fn config_str<'a>(config_json: *const c_char) -> Result<&'a str, (ChodimStatus, String)> {
    if config_json.is_null() {
        return Err(null("config_json"));
    }
    CStr::from_ptr(config_json).to_str().map_err(|e| (ChodimStatus::InvalidArgument, e.to_string()))
}

/// Creates a stepper from a JSON object with keys `grid`, `phys`, `dt` and
/// optionally `initial_amplitude`; the state is the seeded random start.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chodim_stepper_new(config_json: *const c_char, seed: u64, out: *mut *mut ChodimStepper) -> ChodimStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg: StepperConfig = serde_json::from_str(config_str(config_json)?).map_err(|e| (ChodimStatus::Config, e.to_string()))?;
        cfg.grid.validate().map_err(from_lib)?;
        let model = Arc::new(ChoModel::new(cfg.grid, cfg.phys).map_err(from_lib)?);
        let state = random_state(&model, cfg.initial_amplitude, seed);
        let stepper = Stepper::new(model, cfg.dt).map_err(from_lib)?;
        *out = Box::into_raw(Box::new(ChodimStepper { stepper, state, time: 0.0 }));
        Ok(())
    })
}

/// Releases a stepper. Null is ignored.
///
/// # Safety
/// `handle` must come from [`chodim_stepper_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn chodim_stepper_free(handle: *mut ChodimStepper) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

unsafe fn handle_mut<'a>(h: *mut ChodimStepper) -> Result<&'a mut ChodimStepper, (ChodimStatus, String)> {
    h.as_mut().ok_or_else(|| null("handle"))
}

unsafe fn handle_ref<'a>(h: *const ChodimStepper) -> Result<&'a ChodimStepper, (ChodimStatus, String)> {
    h.as_ref().ok_or_else(|| null("handle"))
}

unsafe fn write_out(out: *mut f64, value: f64) -> Result<(), (ChodimStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = value;
    Ok(())
}

/// Advances by `n_steps` steps. On blow-up the handle keeps the last finite state.
///
/// # Safety
/// `handle` must be a live stepper.
#[no_mangle]
pub unsafe extern "C" fn chodim_stepper_step(handle: *mut ChodimStepper, n_steps: usize) -> ChodimStatus {
    guard(|| {
        let h = handle_mut(handle)?;
        let dt = h.stepper.dt();
        for _ in 0..n_steps {
            h.state = h.stepper.step(&h.state).map_err(|e| match e {
                Error::BlowUp { what, .. } => from_lib(Error::BlowUp { time: h.time + dt, what }),
                other => from_lib(other),
            })?;
            h.time += dt;
        }
        Ok(())
    })
}

/// # Safety
/// `handle` must be a live stepper and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chodim_stepper_time(handle: *const ChodimStepper, out: *mut f64) -> ChodimStatus {
    guard(|| write_out(out, handle_ref(handle)?.time))
}

/// Energy functional of the current state.
///
/// # Safety
/// `handle` must be a live stepper and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chodim_stepper_energy(handle: *const ChodimStepper, out: *mut f64) -> ChodimStatus {
    guard(|| {
        let h = handle_ref(handle)?;
        write_out(out, h.model().energy(&h.state).map_err(from_lib)?)
    })
}

/// Energy-space norm of the current state.
///
/// # Safety
/// `handle` must be a live stepper and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn chodim_stepper_norm(handle: *const ChodimStepper, out: *mut f64) -> ChodimStatus {
    guard(|| {
        let h = handle_ref(handle)?;
        write_out(out, h.model().energy_space_norm(&h.state))
    })
}

/// Length of the state buffer: `4 × modes` doubles, laid out as
/// `(Re u, Im u)` per mode followed by `(Re ∂t u, Im ∂t u)` per mode.
///
/// # Safety
/// `handle` must be a live stepper or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn chodim_stepper_state_len(handle: *const ChodimStepper) -> usize {
    handle.as_ref().map_or(0, |h| 4 * h.model().grid().n_modes())
}

/// Copies the state into `buf`, which must hold `chodim_stepper_state_len` doubles.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn chodim_stepper_get_state(handle: *const ChodimStepper, buf: *mut f64, len: usize) -> ChodimStatus {
    guard(|| {
        let h = handle_ref(handle)?;
        let need = 4 * h.model().grid().n_modes();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len != need {
            return Err(from_lib(Error::DimensionMismatch { expected: need, found: len }));
        }
        let out = std::slice::from_raw_parts_mut(buf, len);
        for (slot, c) in out.chunks_exact_mut(2).zip(h.state.u.coeffs.iter().chain(&h.state.ut.coeffs)) {
            slot[0] = c.re;
            slot[1] = c.im;
        }
        Ok(())
    })
}

/// Replaces the state from a buffer in the layout of [`chodim_stepper_get_state`].
///
/// # Safety
/// `buf` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn chodim_stepper_set_state(handle: *mut ChodimStepper, buf: *const f64, len: usize) -> ChodimStatus {
    guard(|| {
        let h = handle_mut(handle)?;
        let modes = h.model().grid().n_modes();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len != 4 * modes {
            return Err(from_lib(Error::DimensionMismatch { expected: 4 * modes, found: len }));
        }
        let src = std::slice::from_raw_parts(buf, len);
        if src.iter().any(|v| !v.is_finite()) {
            return Err((ChodimStatus::InvalidArgument, "state contains non-finite values".into()));
        }
        let coeffs: Vec<Complex64> = src.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
        h.state.u.coeffs = coeffs[..modes].to_vec();
        h.state.ut.coeffs = coeffs[modes..].to_vec();
        Ok(())
    })
}

unsafe fn operator_and_form(
    matrix: *const f64,
    metric: *const f64,
    n: usize,
) -> Result<(DenseOperator, InnerProduct), (ChodimStatus, String)> {
    if matrix.is_null() {
        return Err(null("matrix"));
    }
    if n == 0 {
        return Err((ChodimStatus::InvalidArgument, "n must be positive".into()));
    }
    let l = DMatrix::from_column_slice(n, n, std::slice::from_raw_parts(matrix, n * n));
    let op = DenseOperator::new(l).map_err(from_lib)?;
    let form = if metric.is_null() {
        InnerProduct::identity(n)
    } else {
        InnerProduct::weighted(DMatrix::from_column_slice(n, n, std::slice::from_raw_parts(metric, n * n))).map_err(from_lib)?
    };
    Ok((op, form))
}

/// Largest expansion factor of `d`-dimensional volumes under `matrix`,
/// measured in the inner product `metric` (identity when null).
///
/// # Safety
/// `matrix` (and `metric` if non-null) must point to `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn chodim_omega_d(matrix: *const f64, metric: *const f64, n: usize, d: usize, out: *mut f64) -> ChodimStatus {
    guard(|| {
        let (op, form) = operator_and_form(matrix, metric, n)?;
        write_out(out, omega_d(&op, d, &form).map_err(from_lib)?)
    })
}

/// Largest trace of `matrix` over `d`-dimensional subspaces, measured in
/// `metric` (identity when null).
///
/// # Safety
/// `matrix` (and `metric` if non-null) must point to `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn chodim_trace_d(matrix: *const f64, metric: *const f64, n: usize, d: usize, out: *mut f64) -> ChodimStatus {
    guard(|| {
        let (op, form) = operator_and_form(matrix, metric, n)?;
        write_out(out, trace_d(&op, d, &form).map_err(from_lib)?)
    })
}
