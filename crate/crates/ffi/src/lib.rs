//! C ABI for `wii-core`.
//!
//! Every function returns a [`WiiStatus`]; on failure a one-line message is
//! kept per thread and can be fetched with [`wii_last_error_message`]. Models
//! and datasets are opaque handles released with their `_free` function.
//! IQ buffers are interleaved `(I, Q)` pairs of `f64`, 256 values per
//! snapshot. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use num_complex::Complex64;
use wii_core::dataset::{load_dataset, Dataset};
use wii_core::eval::apply_threshold;
use wii_core::nn::{load_model, AnyModel};
use wii_core::preprocess::{to_feature_matrix, BinOrder, FeatureOptions};
use wii_core::signal::{class_spec, synthesize_burst};
use wii_core::{ClassId, Error, IqSnapshot, NUM_CLASSES, SNAPSHOT_LEN};

/// Values per interleaved IQ snapshot and per feature matrix.
pub const WII_IQ_LEN: usize = 256;
pub const WII_NUM_CLASSES: usize = 15;

const _: () = assert!(WII_IQ_LEN == 2 * SNAPSHOT_LEN && WII_NUM_CLASSES == NUM_CLASSES);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WiiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Io = 4,
    /// Malformed file, JSON or tensor shape.
    Format = 5,
    Panic = 6,
}

/// Loaded model; opaque to C.
pub struct WiiModel(AnyModel);

/// Dataset held in memory; opaque to C.
pub struct WiiDataset(Dataset);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WiiRecordMeta {
    /// Bit `c` set when class `c` is present.
    pub labels: u16,
    /// -1 for single-label records.
    pub utilized_class: i16,
    pub num_interferers: u8,
    /// NaN when unknown, +inf for noise-free records.
    pub snr_db: f64,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> WiiStatus {
    match e {
        Error::InvalidArgument(_) => WiiStatus::InvalidArgument,
        Error::InvalidConfig(_) => WiiStatus::InvalidConfig,
        Error::Io(_) => WiiStatus::Io,
        Error::Format(_) | Error::Shape(_) | Error::Json(_) => WiiStatus::Format,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> WiiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WiiStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is null"));
            WiiStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            WiiStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &'static str) -> Result<*const T, Fail> {
    if p.is_null() {
        Err(Fail::Null(what))
    } else {
        Ok(p)
    }
}

unsafe fn read_iq(iq: *const f64) -> Result<IqSnapshot, Fail> {
    let v = std::slice::from_raw_parts(non_null(iq, "iq")?, WII_IQ_LEN);
    Ok(IqSnapshot::new(v.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())?)
}

unsafe fn write_iq(s: &IqSnapshot, out: *mut f64) {
    let out = std::slice::from_raw_parts_mut(out, WII_IQ_LEN);
    for (pair, c) in out.chunks_exact_mut(2).zip(s.samples()) {
        pair[0] = c.re;
        pair[1] = c.im;
    }
}

unsafe fn read_path(path: *const c_char) -> Result<PathBuf, Fail> {
    let s = CStr::from_ptr(non_null(path, "path")?);
    let s = s.to_str().map_err(|_| Error::InvalidArgument("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

/// Length in bytes of the calling thread's last error message, excluding the
/// terminating NUL.
#[no_mangle]
pub extern "C" fn wii_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len - 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn wii_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// NUL-terminated library version; static storage.
#[no_mangle]
pub extern "C" fn wii_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Synthesizes one unit-power burst of `class_index` (0..15) using the
/// class's `variant_index`-th modulation variant; writes 256 values to `out_iq`.
///
/// # Safety
/// `out_iq` must be valid for 256 writes.
#[no_mangle]
pub unsafe extern "C" fn wii_synthesize_burst(
    class_index: u32,
    variant_index: u32,
    seed: u64,
    out_iq: *mut f64,
) -> WiiStatus {
    guard(|| {
        non_null(out_iq, "out_iq")?;
        let class = ClassId::new(class_index as usize)?;
        let variants = &class_spec(class).variant_set;
        let v = variants.get(variant_index as usize).ok_or_else(|| {
            Error::InvalidArgument(format!("class {class_index} has {} variants", variants.len()))
        })?;
        write_iq(&synthesize_burst(class, v, seed)?, out_iq);
        Ok(())
    })
}

/// Number of modulation variants of a class, or 0 for an invalid class.
#[no_mangle]
pub extern "C" fn wii_variant_count(class_index: u32) -> u32 {
    ClassId::new(class_index as usize).map_or(0, |c| class_spec(c).variant_set.len() as u32)
}

/// Writes the 128 x 2 feature matrix of a snapshot, row-major, to `out`.
///
/// # Safety
/// `iq` must be valid for 256 reads and `out` for 256 writes.
#[no_mangle]
pub unsafe extern "C" fn wii_features(iq: *const f64, centered: bool, normalize: bool, out: *mut f64) -> WiiStatus {
    guard(|| {
        non_null(out, "out")?;
        let s = read_iq(iq)?;
        let bin_order = if centered { BinOrder::Centered } else { BinOrder::Natural };
        let m = to_feature_matrix(&s, FeatureOptions { normalize, bin_order });
        std::slice::from_raw_parts_mut(out, WII_IQ_LEN).copy_from_slice(&m.to_row_major());
        Ok(())
    })
}

/// Label bitmask of the classes whose score is strictly above `threshold`.
///
/// # Safety
/// `scores` must be valid for 15 reads.
#[no_mangle]
pub unsafe extern "C" fn wii_apply_threshold(scores: *const f64, threshold: f64, out_labels: *mut u16) -> WiiStatus {
    guard(|| {
        non_null(out_labels, "out_labels")?;
        let scores = std::slice::from_raw_parts(non_null(scores, "scores")?, NUM_CLASSES);
        wii_core::eval::check_threshold(threshold)?;
        *out_labels = apply_threshold(scores, threshold).bits();
        Ok(())
    })
}

/// Loads a model file; on success `*out` owns a handle for [`wii_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn wii_model_load(path: *const c_char, out: *mut *mut WiiModel) -> WiiStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let model = load_model(&read_path(path)?)?;
        *out = Box::into_raw(Box::new(WiiModel(model)));
        Ok(())
    })
}

/// Number of model outputs, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wii_model_output_len(model: *const WiiModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.output_len())
}

/// Scores one snapshot; writes `wii_model_output_len` values to `out_scores`.
///
/// # Safety
/// `model` must be a live handle, `iq` valid for 256 reads and `out_scores`
/// for `wii_model_output_len(model)` writes.
#[no_mangle]
pub unsafe extern "C" fn wii_model_predict(model: *const WiiModel, iq: *const f64, out_scores: *mut f64) -> WiiStatus {
    guard(|| {
        let model = &*non_null(model, "model")?;
        non_null(out_scores, "out_scores")?;
        let scores = model.0.predict(&read_iq(iq)?)?;
        std::slice::from_raw_parts_mut(out_scores, scores.len()).copy_from_slice(&scores);
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`wii_model_load`] not freed before.
#[no_mangle]
pub unsafe extern "C" fn wii_model_free(model: *mut WiiModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Reads a whole dataset file into memory.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn wii_dataset_load(path: *const c_char, out: *mut *mut WiiDataset) -> WiiStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let ds = load_dataset(&read_path(path)?)?;
        *out = Box::into_raw(Box::new(WiiDataset(ds)));
        Ok(())
    })
}

/// Record count, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wii_dataset_len(dataset: *const WiiDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.len())
}

/// Copies record `index`. Either output may be null to skip it.
///
/// # Safety
/// `dataset` must be a live handle; `out_iq` null or valid for 256 writes;
/// `out_meta` null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn wii_dataset_record(
    dataset: *const WiiDataset,
    index: usize,
    out_iq: *mut f64,
    out_meta: *mut WiiRecordMeta,
) -> WiiStatus {
    guard(|| {
        let ds = &(*non_null(dataset, "dataset")?).0;
        let r = ds.records.get(index).ok_or_else(|| {
            Error::InvalidArgument(format!("index {index} out of range for {} records", ds.len()))
        })?;
        if !out_iq.is_null() {
            write_iq(&r.snapshot, out_iq);
        }
        if !out_meta.is_null() {
            *out_meta = WiiRecordMeta {
                labels: r.labels.bits(),
                utilized_class: r.utilized_class.map_or(-1, |c| c.index() as i16),
                num_interferers: r.num_interferers,
                snr_db: r.snr_db.map_or(f64::NAN, f64::from),
                seed: r.seed,
            };
        }
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a handle from [`wii_dataset_load`] not freed before.
#[no_mangle]
pub unsafe extern "C" fn wii_dataset_free(dataset: *mut WiiDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}
