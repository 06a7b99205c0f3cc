//! C ABI over the piostack library.
//!
//! Every fallible function returns a [`PiostackStatus`]; on failure the
//! message is available from [`piostack_last_error`] on the same thread.
//! Objects are opaque heap handles released with their `_free` function.
//! Strings returned through `out` parameters are released with
//! [`piostack_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use piostack::features::QiefDetectors;
use piostack::labeling::{
    map_heading, normalize_heading, Decision, HeadingMap, DEFAULT_HEADING_MAP,
};
use piostack::stacker::{StackError, StackedModel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PiostackStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    Schema = 6,
    Shape = 7,
    SingleClass = 8,
    Panic = 9,
}

/// Heading outcome from [`piostack_heading_map_lookup`]: a P/I/O bit mask
/// (P = 1, I = 2, O = 4) for labeled headings, otherwise one of these.
pub const PIOSTACK_HEADING_NEGATIVE: i32 = 0;
pub const PIOSTACK_HEADING_DISCARD: i32 = -1;

pub struct PiostackHeadingMap(HeadingMap);
pub struct PiostackQiefDetectors(QiefDetectors);
pub struct PiostackStackedModel(StackedModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(PiostackStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn fail<T>(status: PiostackStatus, msg: impl Into<String>) -> FfiResult<T> {
    Err(Failure(status, msg.into()))
}

/// Runs `f`, records any error or panic, and returns the status.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> PiostackStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PiostackStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PiostackStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return fail(PiostackStatus::NullPointer, format!("{name} is null"));
    }
    CStr::from_ptr(p).to_str().or_else(|_| {
        fail(
            PiostackStatus::InvalidUtf8,
            format!("{name} is not valid UTF-8"),
        )
    })
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(PiostackStatus::NullPointer, format!("{name} is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> FfiResult<&'a mut T> {
    p.as_mut()
        .ok_or_else(|| Failure(PiostackStatus::NullPointer, format!("{name} is null")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref()
        .ok_or_else(|| Failure(PiostackStatus::NullPointer, format!("{name} is null")))
}

fn into_c_string(s: String) -> FfiResult<*mut c_char> {
    CString::new(s).map(CString::into_raw).or_else(|_| {
        fail(
            PiostackStatus::InvalidArgument,
            "result contains a NUL byte",
        )
    })
}

fn stack_status(e: &StackError) -> PiostackStatus {
    match e {
        StackError::Schema { .. } => PiostackStatus::Schema,
        StackError::Shape { .. } => PiostackStatus::Shape,
        StackError::SingleClass { .. } => PiostackStatus::SingleClass,
        StackError::Json(_) => PiostackStatus::Parse,
        _ => PiostackStatus::InvalidArgument,
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn piostack_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn piostack_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn piostack_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Numerically stable logistic function.
#[no_mangle]
pub extern "C" fn piostack_sigmoid(s: f64) -> f64 {
    piostack::base_learner::sigmoid_scalar(s)
}

/// Summed binary cross-entropy over the three labels from logits.
///
/// # Safety
/// `logits` and `targets` point to 3 doubles; `out` to one.
#[no_mangle]
pub unsafe extern "C" fn piostack_bce_with_logits(
    logits: *const f64,
    targets: *const f64,
    out: *mut f64,
) -> PiostackStatus {
    guard(|| {
        let s = slice_arg(logits, 3, "logits")?;
        let t = slice_arg(targets, 3, "targets")?;
        *out_arg(out, "out")? =
            piostack::base_learner::bce_with_logits(&[s[0], s[1], s[2]], &[t[0], t[1], t[2]]);
        Ok(())
    })
}

/// ROC AUC of `scores` against 0/1 `labels`, ties counted as one half.
///
/// # Safety
/// `scores` and `labels` point to `n` elements; `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn piostack_roc_auc(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
) -> PiostackStatus {
    guard(|| {
        let scores = slice_arg(scores, n, "scores")?;
        let labels: Vec<bool> = slice_arg(labels, n, "labels")?
            .iter()
            .map(|&l| l != 0)
            .collect();
        let auc = piostack::metrics::roc_auc(scores, &labels).or_else(|e| {
            let status = match e {
                piostack::metrics::MetricError::SingleClass { .. } => PiostackStatus::SingleClass,
                _ => PiostackStatus::InvalidArgument,
            };
            fail(status, e.to_string())
        })?;
        *out_arg(out, "out")? = auc;
        Ok(())
    })
}

/// Normalized (lowercased, letters only, lemmatized) form of a heading.
///
/// # Safety
/// `raw` is a NUL-terminated string; `out` receives a string to release
/// with [`piostack_string_free`].
#[no_mangle]
pub unsafe extern "C" fn piostack_normalize_heading(
    raw: *const c_char,
    out: *mut *mut c_char,
) -> PiostackStatus {
    guard(|| {
        let raw = str_arg(raw, "raw")?;
        let out = out_arg(out, "out")?;
        *out = into_c_string(normalize_heading(raw))?;
        Ok(())
    })
}

/// The built-in heading map.
///
/// # Safety
/// `out` receives a handle to release with [`piostack_heading_map_free`].
#[no_mangle]
pub unsafe extern "C" fn piostack_heading_map_default(
    out: *mut *mut PiostackHeadingMap,
) -> PiostackStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let map = HeadingMap::parse(DEFAULT_HEADING_MAP)
            .or_else(|e| fail(PiostackStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(PiostackHeadingMap(map)));
        Ok(())
    })
}

/// Parse a heading map from `heading<TAB>decision` lines.
///
/// # Safety
/// `text` is a NUL-terminated string; `out` receives a handle.
#[no_mangle]
pub unsafe extern "C" fn piostack_heading_map_parse(
    text: *const c_char,
    out: *mut *mut PiostackHeadingMap,
) -> PiostackStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let out = out_arg(out, "out")?;
        let map =
            HeadingMap::parse(text).or_else(|e| fail(PiostackStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(PiostackHeadingMap(map)));
        Ok(())
    })
}

/// Normalize `raw_heading` and look it up. `out` receives a label mask,
/// `PIOSTACK_HEADING_NEGATIVE` or `PIOSTACK_HEADING_DISCARD`.
///
/// # Safety
/// `map` is a live handle; `raw_heading` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn piostack_heading_map_lookup(
    map: *const PiostackHeadingMap,
    raw_heading: *const c_char,
    out: *mut i32,
) -> PiostackStatus {
    guard(|| {
        let map = handle(map, "map")?;
        let raw = str_arg(raw_heading, "raw_heading")?;
        *out_arg(out, "out")? = match map_heading(&normalize_heading(raw), &map.0) {
            Decision::Positive(l) => i32::from(l.mask()),
            Decision::Negative => PIOSTACK_HEADING_NEGATIVE,
            Decision::Discard => PIOSTACK_HEADING_DISCARD,
        };
        Ok(())
    })
}

/// # Safety
/// `map` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn piostack_heading_map_free(map: *mut PiostackHeadingMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// The built-in QIEF detectors.
///
/// # Safety
/// `out` receives a handle to release with [`piostack_qief_free`].
#[no_mangle]
pub unsafe extern "C" fn piostack_qief_default(
    out: *mut *mut PiostackQiefDetectors,
) -> PiostackStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(PiostackQiefDetectors(QiefDetectors::default())));
        Ok(())
    })
}

/// Compile detectors from `name<TAB>regex` lines.
///
/// # Safety
/// `text` is a NUL-terminated string; `out` receives a handle.
#[no_mangle]
pub unsafe extern "C" fn piostack_qief_parse(
    text: *const c_char,
    out: *mut *mut PiostackQiefDetectors,
) -> PiostackStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let out = out_arg(out, "out")?;
        let d =
            QiefDetectors::parse(text).or_else(|e| fail(PiostackStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(PiostackQiefDetectors(d)));
        Ok(())
    })
}

/// Match counts in `pct, pop, dose, num` order.
///
/// # Safety
/// `detectors` is a live handle; `text` NUL-terminated; `counts` points to
/// 4 writable `uint32_t`.
#[no_mangle]
pub unsafe extern "C" fn piostack_qief_count(
    detectors: *const PiostackQiefDetectors,
    text: *const c_char,
    counts: *mut u32,
) -> PiostackStatus {
    guard(|| {
        let d = handle(detectors, "detectors")?;
        let text = str_arg(text, "text")?;
        if counts.is_null() {
            return fail(PiostackStatus::NullPointer, "counts is null");
        }
        let c = d.0.count(text).as_array();
        std::slice::from_raw_parts_mut(counts, 4).copy_from_slice(&c);
        Ok(())
    })
}

/// # Safety
/// `detectors` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn piostack_qief_free(detectors: *mut PiostackQiefDetectors) {
    if !detectors.is_null() {
        drop(Box::from_raw(detectors));
    }
}

/// Load a stacked model saved by the `stack` command.
///
/// # Safety
/// `path` is a NUL-terminated UTF-8 path; `out` receives a handle to
/// release with [`piostack_model_free`].
#[no_mangle]
pub unsafe extern "C" fn piostack_model_load(
    path: *const c_char,
    out: *mut *mut PiostackStackedModel,
) -> PiostackStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let text = std::fs::read_to_string(Path::new(path))
            .or_else(|e| fail(PiostackStatus::Io, format!("{path}: {e}")))?;
        let model =
            StackedModel::from_json(&text).or_else(|e| fail(stack_status(&e), e.to_string()))?;
        *out = Box::into_raw(Box::new(PiostackStackedModel(model)));
        Ok(())
    })
}

/// Number of feature columns the model expects.
///
/// # Safety
/// `model` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn piostack_model_n_features(
    model: *const PiostackStackedModel,
    out: *mut usize,
) -> PiostackStatus {
    guard(|| {
        let m = handle(model, "model")?;
        *out_arg(out, "out")? = m.0.n_features();
        Ok(())
    })
}

/// P, I, O probabilities for one stack-matrix row.
///
/// # Safety
/// `model` is a live handle; `x` points to `n` doubles; `probs` to 3.
#[no_mangle]
pub unsafe extern "C" fn piostack_model_predict(
    model: *const PiostackStackedModel,
    x: *const f64,
    n: usize,
    probs: *mut f64,
) -> PiostackStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let x = slice_arg(x, n, "x")?;
        if probs.is_null() {
            return fail(PiostackStatus::NullPointer, "probs is null");
        }
        let p =
            m.0.predict(x)
                .or_else(|e| fail(stack_status(&e), e.to_string()))?;
        std::slice::from_raw_parts_mut(probs, 3).copy_from_slice(&p);
        Ok(())
    })
}

/// # Safety
/// `model` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn piostack_model_free(model: *mut PiostackStackedModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
