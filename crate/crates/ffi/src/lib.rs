//! C ABI for autoseg.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! style functions and released with the matching `*_free`. Fallible calls
//! return an `AutosegStatus`; on failure a message describing the error is
//! available from `autoseg_last_error` on the same thread until the next
//! failing call. Panics never unwind into C: they are reported as
//! `AUTOSEG_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use autoseg::autoencoder::{StackConfig, TrainConfig};
use autoseg::baselines::{bocpd_run, pelt_segment, BocpdConfig, PeltConfig, PeltCost, Penalty};
use autoseg::detector::{detect, PeakConfig};
use autoseg::metrics::{evaluate, EvalConfig};
use autoseg::series::{load_csv, CsvLayout};
use autoseg::windowing::WindowConfig;
use autoseg::{DetectionResult, Error, LabelSet, TimeSeries};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AutosegStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvalidConfig = 3,
    Io = 4,
    Numerical = 5,
    Undefined = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AutosegPeltCost {
    NormalMean = 0,
    NormalMeanVariance = 1,
    Exponential = 2,
    Poisson = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AutosegBocpdModel {
    /// Gamma(1, 1) precision prior on standardised data, hazard 1/1000.
    GammaPrecision = 0,
    /// Normal(1.15e5, 1e4^2) mean prior, noise estimated from the data,
    /// hazard 1/250.
    Gaussian = 1,
}

/// Opaque multichannel time series.
pub struct AutosegSeries(TimeSeries);

/// Opaque detection result: breakpoints and, for the autoencoder, the
/// distance curve.
pub struct AutosegDetection(DetectionResult);

/// Autoencoder detector settings. Obtain defaults from
/// `autoseg_detect_params_default` and override fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AutosegDetectParams {
    pub window_size: usize,
    /// 0 selects half the window, rounded up.
    pub stride: usize,
    pub depth: usize,
    pub feature_ratio: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub min_prominence: f64,
    pub min_separation: usize,
}

/// Evaluation of one detection at one toleration distance.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AutosegEval {
    pub correct: usize,
    pub ground_truth: usize,
    pub alarms: usize,
    pub tpr: f64,
    pub fpr: f64,
    pub pr: f64,
    /// `INFINITY` when there are no alarms.
    pub mse: f64,
    /// NaN when `pl_defined` is false.
    pub pl: f64,
    pub pl_defined: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> AutosegStatus {
    match err {
        Error::Io { .. } | Error::EmptyFile(_) => AutosegStatus::Io,
        Error::InvalidConfig(_) => AutosegStatus::InvalidConfig,
        Error::TrainingDiverged { .. } => AutosegStatus::Numerical,
        Error::Undefined(_) => AutosegStatus::Undefined,
        _ => AutosegStatus::InvalidInput,
    }
}

struct Fail(AutosegStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(AutosegStatus::NullPointer, format!("{what} is null"))
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AutosegStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AutosegStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            AutosegStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn autoseg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn autoseg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy `channels * len` channel-major values (channel 0 first) into a new
/// series.
///
/// # Safety
/// `values` must point to `channels * len` readable doubles and `out` must
/// be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn autoseg_series_new(
    values: *const f64,
    channels: usize,
    len: usize,
    out: *mut *mut AutosegSeries,
) -> AutosegStatus {
    guard(|| {
        let n = channels
            .checked_mul(len)
            .ok_or_else(|| Fail(AutosegStatus::InvalidInput, "series too large".into()))?;
        let data = slice(values, n, "values")?.to_vec();
        emit(out, AutosegSeries(TimeSeries::new(channels, len, data)?))
    })
}

/// Load a numeric CSV. With `channels_as_rows` each row is a channel;
/// otherwise each column is.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn autoseg_series_load_csv(
    path: *const c_char,
    channels_as_rows: bool,
    header: bool,
    out: *mut *mut AutosegSeries,
) -> AutosegStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(AutosegStatus::InvalidInput, "path is not UTF-8".into()))?;
        let layout = if channels_as_rows {
            CsvLayout::ChannelsAsRows
        } else {
            CsvLayout::ChannelsAsColumns
        };
        emit(out, AutosegSeries(load_csv(path, layout, header)?))
    })
}

/// Number of timestamps; 0 for a null handle.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn autoseg_series_len(series: *const AutosegSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.len())
}

/// Number of channels; 0 for a null handle.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn autoseg_series_channels(series: *const AutosegSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.channels())
}

/// # Safety
/// `series` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn autoseg_series_free(series: *mut AutosegSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

#[no_mangle]
pub extern "C" fn autoseg_detect_params_default() -> AutosegDetectParams {
    let train = TrainConfig::default();
    let peaks = PeakConfig::default();
    AutosegDetectParams {
        window_size: 0,
        stride: 0,
        depth: 2,
        feature_ratio: 0.1,
        epochs: train.epochs,
        learning_rate: train.learning_rate,
        weight_decay: train.weight_decay,
        seed: train.seed,
        min_prominence: peaks.min_prominence,
        min_separation: peaks.min_separation,
    }
}

/// Run the autoencoder detector.
///
/// # Safety
/// `series` and `params` must be live, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn autoseg_detect(
    series: *const AutosegSeries,
    params: *const AutosegDetectParams,
    out: *mut *mut AutosegDetection,
) -> AutosegStatus {
    guard(|| {
        let series = &handle(series, "series")?.0;
        let p = *handle(params, "params")?;
        let window = if p.stride == 0 {
            WindowConfig::half_overlap(p.window_size)?
        } else {
            WindowConfig::new(p.window_size, p.stride)?
        };
        let train = TrainConfig {
            learning_rate: p.learning_rate,
            weight_decay: p.weight_decay,
            epochs: p.epochs,
            seed: p.seed,
            ..TrainConfig::default()
        };
        let stack = StackConfig::from_ratio(
            p.window_size * series.channels(),
            p.depth,
            p.feature_ratio,
            train,
        )?;
        let peaks = PeakConfig {
            min_prominence: p.min_prominence,
            min_separation: p.min_separation,
            ..PeakConfig::default()
        };
        emit(out, AutosegDetection(detect(series, &window, &stack, &peaks)?))
    })
}

/// Run PELT. `cost` is an `AutosegPeltCost` value; a `penalty` of 0 or
/// less selects BIC.
///
/// # Safety
/// `series` must be live, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn autoseg_pelt(
    series: *const AutosegSeries,
    cost: u32,
    penalty: f64,
    min_segment: usize,
    out: *mut *mut AutosegDetection,
) -> AutosegStatus {
    guard(|| {
        let series = &handle(series, "series")?.0;
        let cost = match cost {
            c if c == AutosegPeltCost::NormalMean as u32 => PeltCost::NormalMean,
            c if c == AutosegPeltCost::NormalMeanVariance as u32 => PeltCost::NormalMeanVariance,
            c if c == AutosegPeltCost::Exponential as u32 => PeltCost::Exponential,
            c if c == AutosegPeltCost::Poisson as u32 => PeltCost::Poisson,
            other => return Err(Fail(AutosegStatus::InvalidConfig, format!("unknown PELT cost {other}"))),
        };
        let cfg = PeltConfig {
            cost,
            penalty: if penalty > 0.0 {
                Penalty::Value(penalty)
            } else {
                Penalty::Bic
            },
            min_segment: min_segment.max(1),
        };
        emit(out, AutosegDetection(pelt_segment(series, &cfg)?))
    })
}

/// Run BOCPD from an `AutosegBocpdModel` preset. `hazard_rate <= 0` keeps the preset's value;
/// `threshold` is the changepoint probability cutoff (0.5 is conventional).
///
/// # Safety
/// `series` must be live, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn autoseg_bocpd(
    series: *const AutosegSeries,
    model: u32,
    hazard_rate: f64,
    threshold: f64,
    out: *mut *mut AutosegDetection,
) -> AutosegStatus {
    guard(|| {
        let series = &handle(series, "series")?.0;
        let mut cfg = match model {
            m if m == AutosegBocpdModel::GammaPrecision as u32 => BocpdConfig::gamma_default(),
            m if m == AutosegBocpdModel::Gaussian as u32 => BocpdConfig::gaussian_default(),
            other => return Err(Fail(AutosegStatus::InvalidConfig, format!("unknown BOCPD model {other}"))),
        };
        if hazard_rate > 0.0 {
            cfg.hazard_rate = hazard_rate;
        }
        cfg.threshold = threshold;
        emit(out, AutosegDetection(bocpd_run(series, &cfg)?.result))
    })
}

/// Borrow the breakpoints; the array lives as long as the handle.
///
/// # Safety
/// `detection` must be null or live; `len` must be valid to write.
#[no_mangle]
pub unsafe extern "C" fn autoseg_detection_breakpoints(
    detection: *const AutosegDetection,
    len: *mut usize,
) -> *const usize {
    let Some(d) = detection.as_ref() else {
        if !len.is_null() {
            *len = 0;
        }
        return ptr::null();
    };
    if !len.is_null() {
        *len = d.0.breakpoints.len();
    }
    d.0.breakpoints.as_ptr()
}

/// Borrow the distance curve. Returns false (and zero length) for
/// detections without one, such as the baselines.
///
/// # Safety
/// `detection` must be null or live; the out-pointers must be valid to
/// write.
#[no_mangle]
pub unsafe extern "C" fn autoseg_detection_curve(
    detection: *const AutosegDetection,
    timestamps: *mut *const usize,
    values: *mut *const f64,
    len: *mut usize,
) -> bool {
    let curve = detection.as_ref().and_then(|d| d.0.curve.as_ref());
    let (t, v, n) = match curve {
        Some(c) => (c.boundary_timestamps.as_ptr(), c.values.as_ptr(), c.values.len()),
        None => (ptr::null(), ptr::null(), 0),
    };
    if !timestamps.is_null() {
        *timestamps = t;
    }
    if !values.is_null() {
        *values = v;
    }
    if !len.is_null() {
        *len = n;
    }
    curve.is_some()
}

/// Serialise to JSON. Free the string with `autoseg_string_free`.
///
/// # Safety
/// `detection` must be live, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn autoseg_detection_to_json(
    detection: *const AutosegDetection,
    out: *mut *mut c_char,
) -> AutosegStatus {
    guard(|| {
        let d = handle(detection, "detection")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let json = d.0.to_json()?;
        *out = CString::new(json)
            .map_err(|e| Fail(AutosegStatus::InvalidInput, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `detection` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn autoseg_detection_free(detection: *mut AutosegDetection) {
    if !detection.is_null() {
        drop(Box::from_raw(detection));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn autoseg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Score a detection against sorted ground-truth breakpoints of a series of
/// length `series_len`, at toleration distance `tau` samples.
///
/// # Safety
/// `truth` must point to `n_truth` values, `detection` must be live and
/// `out` valid to write.
#[no_mangle]
pub unsafe extern "C" fn autoseg_evaluate(
    truth: *const usize,
    n_truth: usize,
    series_len: usize,
    detection: *const AutosegDetection,
    tau: usize,
    out: *mut AutosegEval,
) -> AutosegStatus {
    guard(|| {
        let truth = slice(truth, n_truth, "truth")?.to_vec();
        let d = &handle(detection, "detection")?.0;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let labels = LabelSet::new(truth, series_len)?;
        d.validate(series_len)?;
        let cfg = EvalConfig {
            toleration: tau,
            roc_taus: vec![tau],
            ..EvalConfig::default()
        };
        let r = evaluate(&labels, d, &cfg)?;
        *out = AutosegEval {
            correct: r.counts.correct,
            ground_truth: r.counts.ground_truth,
            alarms: r.counts.alarms,
            tpr: r.tpr,
            fpr: r.fpr,
            pr: r.pr,
            mse: r.mse,
            pl: r.pl.value().unwrap_or(f64::NAN),
            pl_defined: r.pl.value().is_some(),
        };
        Ok(())
    })
}
