//! C ABI for the wheel-mounted inertial navigation library.
//!
//! The functions here are exported with unmangled names and mirrored in the
//! generated `include/wminav.h`. Handles are opaque pointers owned by the
//! library; every fallible call returns a [`WminavStatus`] code and leaves a
//! message retrievable through [`wminav_last_error`] on failure.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::path::PathBuf;

use wminav::dataio::WheelTag;
use wminav::error::Error;
use wminav::mechanizer::DEFAULT_GRAVITY;
use wminav::simkit::{simulate_session, ImuNoiseSpec, PeriodicTrajSpec, SessionSpec};
use wminav::tensornet::Tensor;
use wminav::types::Trajectory;

/// Status codes shared with the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WminavStatus {
    Ok = 0,
    InvalidArgument = 1,
    DataError = 2,
    NumericError = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(err: &Error) -> WminavStatus {
    let msg = CString::new(err.to_string()).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = msg);
    match err.exit_code() {
        1 => WminavStatus::InvalidArgument,
        2 => WminavStatus::DataError,
        _ => WminavStatus::NumericError,
    }
}

fn set_error_msg(msg: &str, status: WminavStatus) -> WminavStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(msg).unwrap_or_default());
    status
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wminav_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn wminav_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Opaque planar trajectory handle.
pub struct WminavTrajectory(Trajectory);

/// Opaque displacement-regressor handle.
pub struct WminavModel(wminav::wminet::ModelParams);

unsafe fn cstr_arg(ptr: *const c_char, name: &str) -> Result<String, WminavStatus> {
    if ptr.is_null() {
        return Err(set_error_msg(
            &format!("{name} must not be null"),
            WminavStatus::InvalidArgument,
        ));
    }
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(s.to_string()),
        Err(_) => Err(set_error_msg(
            &format!("{name} is not valid UTF-8"),
            WminavStatus::InvalidArgument,
        )),
    }
}

/// Loads a `t,x,y` trajectory CSV into a new handle.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wminav_trajectory_load_csv(
    path: *const c_char,
    out: *mut *mut WminavTrajectory,
) -> WminavStatus {
    if out.is_null() {
        return set_error_msg("out must not be null", WminavStatus::InvalidArgument);
    }
    let path = match unsafe { cstr_arg(path, "path") } {
        Ok(p) => p,
        Err(st) => return st,
    };
    match Trajectory::read_csv(&PathBuf::from(path)) {
        Ok(t) => {
            unsafe { *out = Box::into_raw(Box::new(WminavTrajectory(t))) };
            WminavStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Releases a trajectory handle. A null pointer is a no-op.
///
/// # Safety
/// `handle` must be null or a pointer previously returned by this library.
#[no_mangle]
pub unsafe extern "C" fn wminav_trajectory_free(handle: *mut WminavTrajectory) {
    if !handle.is_null() {
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Number of points in a trajectory.
///
/// # Safety
/// `handle` must be a valid trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn wminav_trajectory_len(handle: *const WminavTrajectory) -> usize {
    if handle.is_null() {
        return 0;
    }
    unsafe { &*handle }.0.len()
}

/// Reads one trajectory point.
///
/// # Safety
/// `handle` must be valid; `t`, `x`, `y` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wminav_trajectory_point(
    handle: *const WminavTrajectory,
    index: usize,
    t: *mut c_double,
    x: *mut c_double,
    y: *mut c_double,
) -> WminavStatus {
    if handle.is_null() || t.is_null() || x.is_null() || y.is_null() {
        return set_error_msg("null pointer argument", WminavStatus::InvalidArgument);
    }
    let traj = unsafe { &*handle };
    match traj.0.points().get(index) {
        Some(p) => {
            unsafe {
                *t = p.t;
                *x = p.x;
                *y = p.y;
            }
            WminavStatus::Ok
        }
        None => set_error_msg(
            &format!("index {index} out of range ({} points)", traj.0.len()),
            WminavStatus::InvalidArgument,
        ),
    }
}

/// Generates a synthetic session directory (stationary prologue, smooth
/// ramps, periodic motion). `noise` of 0 disables the sensor error model.
///
/// # Safety
/// `out_dir` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wminav_simulate_session(
    out_dir: *const c_char,
    speed_mps: c_double,
    amplitude_m: c_double,
    frequency_hz: c_double,
    duration_s: c_double,
    seed: u64,
    noise: c_int,
) -> WminavStatus {
    let dir = match unsafe { cstr_arg(out_dir, "out_dir") } {
        Ok(d) => d,
        Err(st) => return st,
    };
    let spec = SessionSpec {
        traj: PeriodicTrajSpec {
            speed: speed_mps,
            amplitude: amplitude_m,
            frequency_hz,
            duration: duration_s,
            heading: 0.0,
        },
        noise: (noise != 0).then(|| ImuNoiseSpec { seed, ..Default::default() }),
        ..Default::default()
    };
    match simulate_session(&PathBuf::from(dir), &spec) {
        Ok(()) => WminavStatus::Ok,
        Err(e) => set_error(&e),
    }
}

/// Dead-reckons one wheel stream of a session directory. On success `est`
/// receives the mechanized trajectory and `truth` the RTK-derived wheel
/// track over the same span.
///
/// # Safety
/// `session_dir` and `wheel` must be valid strings; `est` and `truth` valid
/// pointers.
#[no_mangle]
pub unsafe extern "C" fn wminav_mechanize_session(
    session_dir: *const c_char,
    wheel: *const c_char,
    planar_2d: c_int,
    est: *mut *mut WminavTrajectory,
    truth: *mut *mut WminavTrajectory,
) -> WminavStatus {
    if est.is_null() || truth.is_null() {
        return set_error_msg("output pointers must not be null", WminavStatus::InvalidArgument);
    }
    let dir = match unsafe { cstr_arg(session_dir, "session_dir") } {
        Ok(d) => d,
        Err(st) => return st,
    };
    let wheel_name = match unsafe { cstr_arg(wheel, "wheel") } {
        Ok(w) => w,
        Err(st) => return st,
    };
    let run = (|| -> wminav::Result<wminav::evalkit::WminBaselineRun> {
        let tag = WheelTag::parse(&wheel_name)?;
        let session =
            wminav::dataio::synchronize(wminav::dataio::load_session(&PathBuf::from(&dir))?)?;
        wminav::evalkit::wmin_baseline(&session, tag, planar_2d != 0, DEFAULT_GRAVITY)
    })();
    match run {
        Ok(r) => {
            unsafe {
                *est = Box::into_raw(Box::new(WminavTrajectory(r.estimated)));
                *truth = Box::into_raw(Box::new(WminavTrajectory(r.wheel_truth)));
            }
            WminavStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Position RMSE between a ground-truth and an estimated trajectory, m.
///
/// # Safety
/// Both handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wminav_prmse(
    gt: *const WminavTrajectory,
    est: *const WminavTrajectory,
    out: *mut c_double,
) -> WminavStatus {
    if gt.is_null() || est.is_null() || out.is_null() {
        return set_error_msg("null pointer argument", WminavStatus::InvalidArgument);
    }
    match wminav::evalkit::prmse(unsafe { &(*gt).0 }, unsafe { &(*est).0 }) {
        Ok(v) => {
            unsafe { *out = v };
            WminavStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Total distance error in percent from a PRMSE and a trajectory length.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wminav_tde(
    prmse_m: c_double,
    length_m: c_double,
    out: *mut c_double,
) -> WminavStatus {
    if out.is_null() {
        return set_error_msg("out must not be null", WminavStatus::InvalidArgument);
    }
    match wminav::evalkit::tde(prmse_m, length_m) {
        Ok(v) => {
            unsafe { *out = v };
            WminavStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Loads a displacement-regressor checkpoint.
///
/// # Safety
/// `path` must be a valid string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wminav_model_load(
    path: *const c_char,
    out: *mut *mut WminavModel,
) -> WminavStatus {
    if out.is_null() {
        return set_error_msg("out must not be null", WminavStatus::InvalidArgument);
    }
    let path = match unsafe { cstr_arg(path, "path") } {
        Ok(p) => p,
        Err(st) => return st,
    };
    match wminav::wminet::load_model(&PathBuf::from(path)) {
        Ok(m) => {
            unsafe { *out = Box::into_raw(Box::new(WminavModel(m))) };
            WminavStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}

/// Releases a model handle. A null pointer is a no-op.
///
/// # Safety
/// `handle` must be null or a pointer previously returned by this library.
#[no_mangle]
pub unsafe extern "C" fn wminav_model_free(handle: *mut WminavModel) {
    if !handle.is_null() {
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// IMU samples per input window of a loaded model.
///
/// # Safety
/// `handle` must be a valid model handle.
#[no_mangle]
pub unsafe extern "C" fn wminav_model_window(handle: *const WminavModel) -> usize {
    if handle.is_null() {
        return 0;
    }
    unsafe { &*handle }.0.config.window
}

/// Displacement intervals per output of a loaded model.
///
/// # Safety
/// `handle` must be a valid model handle.
#[no_mangle]
pub unsafe extern "C" fn wminav_model_intervals(handle: *const WminavModel) -> usize {
    if handle.is_null() {
        return 0;
    }
    unsafe { &*handle }.0.config.intervals
}

/// Runs the regressor on one window. `acc` and `gyro` hold `3 x window`
/// row-major values (axis-major); `deltas_out` receives `2 x intervals`
/// values as (dx, dy) pairs.
///
/// # Safety
/// `handle` must be valid; the arrays must match the model's window and
/// interval sizes.
#[no_mangle]
pub unsafe extern "C" fn wminav_model_infer(
    handle: *const WminavModel,
    acc: *const c_double,
    gyro: *const c_double,
    deltas_out: *mut c_double,
) -> WminavStatus {
    if handle.is_null() || acc.is_null() || gyro.is_null() || deltas_out.is_null() {
        return set_error_msg("null pointer argument", WminavStatus::InvalidArgument);
    }
    let model = unsafe { &(*handle).0 };
    let n = 3 * model.config.window;
    let acc_t = match Tensor::new(vec![3, model.config.window], unsafe {
        std::slice::from_raw_parts(acc, n).to_vec()
    }) {
        Ok(t) => t,
        Err(e) => return set_error(&e),
    };
    let gyro_t = match Tensor::new(vec![3, model.config.window], unsafe {
        std::slice::from_raw_parts(gyro, n).to_vec()
    }) {
        Ok(t) => t,
        Err(e) => return set_error(&e),
    };
    match wminav::wminet::forward(model, &acc_t, &gyro_t) {
        Ok(pred) => {
            let out = unsafe {
                std::slice::from_raw_parts_mut(deltas_out, 2 * model.config.intervals)
            };
            for (i, d) in pred.deltas.iter().enumerate() {
                out[2 * i] = d[0];
                out[2 * i + 1] = d[1];
            }
            WminavStatus::Ok
        }
        Err(e) => set_error(&e),
    }
}
