//! C interface to `mmg_teleop`.
//!
//! Every function returns an [`MmgStatus`]; outputs go through pointer
//! arguments. Handles are opaque and must be released with their `_free`
//! function. After a failure, [`mmg_last_error`] returns the message for the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mmg_teleop::classifier::ModelCheckpoint;
use mmg_teleop::config::AppConfig;
use mmg_teleop::control::force_to_feedback;
use mmg_teleop::harness::{ClientMessage, Session};
use mmg_teleop::signal::{savitzky_golay, FilterSpec, SignalWindow};
use mmg_teleop::sim::required_grip_force;
use mmg_teleop::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Rejected = 3,
    Io = 4,
    Checkpoint = 5,
    Runtime = 6,
    Panic = 7,
}

/// Trained classifier.
pub struct MmgClassifier {
    ckpt: ModelCheckpoint,
}

/// Live session with the default setup and course.
pub struct MmgSession {
    session: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> MmgStatus {
    match e {
        Error::InvalidSpec(_) | Error::Config(_) | Error::Shape { .. } | Error::Toml(_) | Error::Json(_) => {
            MmgStatus::InvalidArgument
        }
        Error::RejectedInput(_) | Error::Action(_) | Error::Frame(_) => MmgStatus::Rejected,
        Error::Io { .. } | Error::Csv(_) => MmgStatus::Io,
        Error::Checkpoint(_) => MmgStatus::Checkpoint,
        _ => MmgStatus::Runtime,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (MmgStatus, String)>) -> MmgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MmgStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MmgStatus::Panic
        }
    }
}

fn lib<T>(r: mmg_teleop::Result<T>) -> Result<T, (MmgStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null<T>(p: *const T, name: &str) -> Result<(), (MmgStatus, String)> {
    if p.is_null() {
        Err((MmgStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (MmgStatus, String)> {
    null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (MmgStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the buffer size needed for the
/// whole message.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mmg_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len) - 1;
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Savitzky-Golay smoothing of `n` samples into `out` (also `n` samples).
///
/// # Safety
/// `x` and `out` must point to `n` valid doubles.
#[no_mangle]
pub unsafe extern "C" fn mmg_savgol(x: *const f64, n: usize, window: usize, order: usize, out: *mut f64) -> MmgStatus {
    guard(|| {
        null(x, "x")?;
        null(out, "out")?;
        let spec = FilterSpec {
            sg_window: window,
            sg_order: order,
            ..FilterSpec::default()
        };
        let y = lib(savitzky_golay(std::slice::from_raw_parts(x, n), &spec))?;
        std::ptr::copy_nonoverlapping(y.as_ptr(), out, n);
        Ok(())
    })
}

/// Squeeze force needed to hold an object of `mass_g` grams with surface
/// roughness `ra_um`.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn mmg_required_grip_force(mass_g: f64, ra_um: f64, out: *mut f64) -> MmgStatus {
    guard(|| {
        null(out, "out")?;
        if !(mass_g > 0.0 && mass_g.is_finite() && ra_um >= 0.0 && ra_um.is_finite()) {
            return Err((MmgStatus::InvalidArgument, format!("mass {mass_g} g / roughness {ra_um} um")));
        }
        *out = required_grip_force(mass_g, ra_um);
        Ok(())
    })
}

/// Vibration cue 1..=8 for a grip force.
///
/// # Safety
/// `out` must point to a writable byte.
#[no_mangle]
pub unsafe extern "C" fn mmg_force_to_feedback(
    force_n: f64,
    slip: bool,
    over_force: bool,
    f_max_n: f64,
    out: *mut u8,
) -> MmgStatus {
    guard(|| {
        null(out, "out")?;
        *out = lib(force_to_feedback(force_n, slip, over_force, f_max_n))?;
        Ok(())
    })
}

/// Loads a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mmg_classifier_load(path: *const c_char, out: *mut *mut MmgClassifier) -> MmgStatus {
    guard(|| {
        null(out, "out")?;
        let path = str_arg(path, "path")?;
        let ckpt = lib(ModelCheckpoint::load(Path::new(path)))?;
        *out = Box::into_raw(Box::new(MmgClassifier { ckpt }));
        Ok(())
    })
}

/// Input shape expected by the classifier.
///
/// # Safety
/// `c` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mmg_classifier_shape(
    c: *const MmgClassifier,
    channels: *mut usize,
    window_len: *mut usize,
    classes: *mut usize,
) -> MmgStatus {
    guard(|| {
        null(c, "classifier")?;
        null(channels, "channels")?;
        null(window_len, "window_len")?;
        null(classes, "classes")?;
        let m = &(*c).ckpt.config;
        *channels = m.channels;
        *window_len = m.window_len;
        *classes = m.classes;
        Ok(())
    })
}

/// Classifies one raw window stored channel-major (`channels * len` doubles).
/// Writes the class index and, when `probs` is not null, `probs_len`
/// class probabilities.
///
/// # Safety
/// `samples` must point to `channels * len` doubles, `class_index` to a
/// writable u32 and `probs` (if not null) to `probs_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mmg_classifier_predict(
    c: *const MmgClassifier,
    samples: *const f64,
    channels: usize,
    len: usize,
    sample_rate_hz: f64,
    class_index: *mut u32,
    probs: *mut f64,
    probs_len: usize,
) -> MmgStatus {
    guard(|| {
        null(c, "classifier")?;
        null(samples, "samples")?;
        null(class_index, "class_index")?;
        let flat = std::slice::from_raw_parts(samples, channels * len);
        let rows = flat.chunks(len.max(1)).map(<[f64]>::to_vec).collect();
        let w = lib(SignalWindow::new(rows, sample_rate_hz, 0, None))?;
        let p = lib((*c).ckpt.predict(&w))?;
        *class_index = p.index as u32;
        if !probs.is_null() {
            if probs_len != p.probabilities.len() {
                return Err((
                    MmgStatus::InvalidArgument,
                    format!("probs holds {probs_len} values, model has {} classes", p.probabilities.len()),
                ));
            }
            std::ptr::copy_nonoverlapping(p.probabilities.as_ptr(), probs, probs_len);
        }
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a handle from [`mmg_classifier_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mmg_classifier_free(c: *mut MmgClassifier) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Starts a session on the built-in course and catalog.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mmg_session_new(seed: u64, telemetry_hz: f64, out: *mut *mut MmgSession) -> MmgStatus {
    guard(|| {
        null(out, "out")?;
        let cfg = AppConfig::default();
        let scenario = lib(cfg.scenario())?;
        let session = lib(Session::new(&cfg.setup(), &scenario, seed, telemetry_hz))?;
        *out = Box::into_raw(Box::new(MmgSession { session }));
        Ok(())
    })
}

/// Applies one client message in the WebSocket JSON format.
///
/// # Safety
/// `s` must be a live handle and `json` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mmg_session_apply(s: *mut MmgSession, json: *const c_char) -> MmgStatus {
    guard(|| {
        null(s, "session")?;
        let json = str_arg(json, "json")?;
        let msg: ClientMessage = lib(serde_json::from_str(json).map_err(Error::from))?;
        lib((*s).session.apply(msg))
    })
}

/// Advances the session by `ms` and returns the server messages as a JSON
/// array in `out_json`, to be released with [`mmg_string_free`].
///
/// # Safety
/// `s` must be a live handle and `out_json` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mmg_session_advance(s: *mut MmgSession, ms: i64, out_json: *mut *mut c_char) -> MmgStatus {
    guard(|| {
        null(s, "session")?;
        null(out_json, "out_json")?;
        let msgs = lib((*s).session.advance(ms))?;
        (*s).session.drain_log();
        let text = lib(serde_json::to_string(&msgs).map_err(Error::from))?;
        *out_json = CString::new(text).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// Current session time in milliseconds.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mmg_session_now_ms(s: *const MmgSession, out: *mut i64) -> MmgStatus {
    guard(|| {
        null(s, "session")?;
        null(out, "out")?;
        *out = (*s).session.now_ms();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from [`mmg_session_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mmg_session_free(s: *mut MmgSession) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `p` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mmg_string_free(p: *mut c_char) {
    if !p.is_null() {
        drop(CString::from_raw(p));
    }
}
