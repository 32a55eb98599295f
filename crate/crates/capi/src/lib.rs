//! C ABI for the flowforensics pipeline.
//!
//! Conventions:
//! - Datasets and models are opaque handles created and destroyed here;
//!   never free them with `free()`.
//! - Every fallible call returns an [`FfStatus`]; on any non-OK status the
//!   thread-local message from [`ff_last_error`] describes the failure.
//! - Strings returned through `*mut *mut c_char` are NUL-terminated, owned
//!   by the caller, and must be released with [`ff_string_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use flowforensics::classifiers::Classifier;
use flowforensics::evaluate::{cross_validate, ClassifierSpec, CvOptions, FeatureSelection, FittedPipeline};
use flowforensics::flow_model::Dataset;
use flowforensics::forensics::{attribute_flows, emit_report, ForensicReport, GroupBy, ReportFormat, ReportMeta};
use flowforensics::ingest::{parse_flow_csv, synth_flows, SchemaDescriptor};
use flowforensics::preprocess::rank_features;
use flowforensics::Error;

/// Result codes for every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfStatus {
    /// Success.
    Ok = 0,
    /// A configuration or usage error (bad arguments, bad JSON spec).
    ErrConfig = 1,
    /// A data error (I/O, schema, parse, label problems).
    ErrData = 2,
    /// A null pointer was passed where a value is required.
    ErrNullPointer = 3,
    /// A string argument was not valid UTF-8.
    ErrUtf8 = 4,
    /// An internal panic was caught at the boundary.
    ErrInternal = 5,
}

/// Opaque dataset handle.
pub struct FfDataset {
    inner: Dataset,
}

/// Opaque trained-model handle (classifier plus its fitted preprocessing).
pub struct FfModel {
    inner: FittedPipeline,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).expect("NULs removed"));
}

fn status_of(e: &Error) -> FfStatus {
    match e {
        Error::Config(_) | Error::InvalidInput(_) => FfStatus::ErrConfig,
        _ => FfStatus::ErrData,
    }
}

fn fail(e: Error) -> FfStatus {
    set_error(&e.to_string());
    status_of(&e)
}

/// Message for the most recent error on this thread. The pointer stays
/// valid until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn ff_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn guard(body: impl FnOnce() -> FfStatus) -> FfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            FfStatus::ErrInternal
        }
    }
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string or null.
unsafe fn utf8_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, FfStatus> {
    if ptr.is_null() {
        set_error(&format!("{name} is null"));
        return Err(FfStatus::ErrNullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{name} is not valid UTF-8"));
        FfStatus::ErrUtf8
    })
}

fn out_string(out: *mut *mut c_char, text: String) -> FfStatus {
    let sanitized: String = text.chars().filter(|&c| c != '\0').collect();
    let c = CString::new(sanitized).expect("NULs removed");
    unsafe { *out = c.into_raw() };
    FfStatus::Ok
}

macro_rules! require_nonnull {
    ($ptr:expr, $name:literal) => {
        if $ptr.is_null() {
            set_error(concat!($name, " is null"));
            return FfStatus::ErrNullPointer;
        }
    };
}

/// Parses a flow CSV under a schema descriptor file into a dataset handle.
///
/// # Safety
/// `schema_path` and `csv_path` must be valid NUL-terminated strings;
/// `out_dataset` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_dataset_load(
    schema_path: *const c_char,
    csv_path: *const c_char,
    out_dataset: *mut *mut FfDataset,
) -> FfStatus {
    guard(|| {
        require_nonnull!(out_dataset, "out_dataset");
        let schema_path = match utf8_arg(schema_path, "schema_path") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let csv_path = match utf8_arg(csv_path, "csv_path") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let descriptor = match SchemaDescriptor::load(Path::new(schema_path)) {
            Ok(d) => d,
            Err(e) => return fail(e),
        };
        let file = match std::fs::File::open(csv_path) {
            Ok(f) => f,
            Err(e) => return fail(Error::io(csv_path, e)),
        };
        match parse_flow_csv(std::io::BufReader::new(file), &descriptor) {
            Ok(d) => {
                *out_dataset = Box::into_raw(Box::new(FfDataset { inner: d }));
                FfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Generates the deterministic synthetic benchmark dataset.
///
/// # Safety
/// `out_dataset` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_dataset_synth(
    n_records: usize,
    attack_fraction: f64,
    separation: f64,
    seed: u64,
    out_dataset: *mut *mut FfDataset,
) -> FfStatus {
    guard(|| {
        require_nonnull!(out_dataset, "out_dataset");
        match synth_flows(n_records, attack_fraction, separation, seed) {
            Ok(d) => {
                *out_dataset = Box::into_raw(Box::new(FfDataset { inner: d }));
                FfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of records; 0 for a null handle.
///
/// # Safety
/// `dataset` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn ff_dataset_len(dataset: *const FfDataset) -> usize {
    if dataset.is_null() {
        return 0;
    }
    (*dataset).inner.len()
}

/// Releases a dataset handle. Null is a no-op.
///
/// # Safety
/// `dataset` must be a handle from this library (or null) and not used again.
#[no_mangle]
pub unsafe extern "C" fn ff_dataset_free(dataset: *mut FfDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Ranks features by information gain; writes `rank,feature,ig` lines.
///
/// # Safety
/// `dataset` must be a live handle; `out_text` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_rank(
    dataset: *const FfDataset,
    out_text: *mut *mut c_char,
) -> FfStatus {
    guard(|| {
        require_nonnull!(dataset, "dataset");
        require_nonnull!(out_text, "out_text");
        match rank_features(&(*dataset).inner) {
            Ok(r) => out_string(out_text, r.export()),
            Err(e) => fail(e),
        }
    })
}

/// Trains a classifier described by a JSON spec, e.g.
/// `{"classifier":"dt"}` or
/// `{"classifier":"arm","min_support":0.05,"min_confidence":0.9,"max_antecedent":3}`.
/// Valid tags: arm, dt, nb, ann.
///
/// # Safety
/// `dataset` must be a live handle; `spec_json` a valid NUL-terminated
/// string; `out_model` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_train(
    dataset: *const FfDataset,
    spec_json: *const c_char,
    out_model: *mut *mut FfModel,
) -> FfStatus {
    guard(|| {
        require_nonnull!(dataset, "dataset");
        require_nonnull!(out_model, "out_model");
        let spec_json = match utf8_arg(spec_json, "spec_json") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let spec: ClassifierSpec = match serde_json::from_str(spec_json) {
            Ok(s) => s,
            Err(e) => return fail(Error::Config(format!("invalid classifier spec: {e}"))),
        };
        match FittedPipeline::fit(&(*dataset).inner, &spec) {
            Ok(p) => {
                *out_model = Box::into_raw(Box::new(FfModel { inner: p }));
                FfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Serializes a model (classifier plus fitted preprocessing) to JSON.
///
/// # Safety
/// `model` must be a live handle; `out_text` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_model_to_json(
    model: *const FfModel,
    out_text: *mut *mut c_char,
) -> FfStatus {
    guard(|| {
        require_nonnull!(model, "model");
        require_nonnull!(out_text, "out_text");
        match (*model).inner.to_json() {
            Ok(json) => out_string(out_text, json),
            Err(e) => fail(e),
        }
    })
}

/// Restores a model previously produced by [`ff_model_to_json`].
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out_model` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_model_from_json(
    json: *const c_char,
    out_model: *mut *mut FfModel,
) -> FfStatus {
    guard(|| {
        require_nonnull!(out_model, "out_model");
        let json = match utf8_arg(json, "json") {
            Ok(s) => s,
            Err(st) => return st,
        };
        match FittedPipeline::from_json(json) {
            Ok(p) => {
                *out_model = Box::into_raw(Box::new(FfModel { inner: p }));
                FfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be a handle from this library (or null) and not used again.
#[no_mangle]
pub unsafe extern "C" fn ff_model_free(model: *mut FfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predicts every record, writing one 0/1 label per record into
/// `out_labels` (capacity `out_len`, which must be at least the dataset
/// length).
///
/// # Safety
/// `model` and `dataset` must be live handles; `out_labels` must point to
/// at least `out_len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ff_predict(
    model: *const FfModel,
    dataset: *const FfDataset,
    out_labels: *mut u8,
    out_len: usize,
) -> FfStatus {
    guard(|| {
        require_nonnull!(model, "model");
        require_nonnull!(dataset, "dataset");
        require_nonnull!(out_labels, "out_labels");
        let d = &(*dataset).inner;
        if out_len < d.len() {
            set_error(&format!("out_len {out_len} < dataset length {}", d.len()));
            return FfStatus::ErrConfig;
        }
        match (*model).inner.predict_all(d) {
            Ok(predictions) => {
                let out = std::slice::from_raw_parts_mut(out_labels, d.len());
                for (slot, p) in out.iter_mut().zip(&predictions) {
                    *slot = p.label;
                }
                FfStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Runs stratified k-fold cross-validation with a JSON classifier spec and
/// returns the textual report.
///
/// # Safety
/// `dataset` must be a live handle; `spec_json` a valid NUL-terminated
/// string; `out_text` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_cross_validate(
    dataset: *const FfDataset,
    spec_json: *const c_char,
    folds: usize,
    seed: u64,
    out_text: *mut *mut c_char,
) -> FfStatus {
    guard(|| {
        require_nonnull!(dataset, "dataset");
        require_nonnull!(out_text, "out_text");
        let spec_json = match utf8_arg(spec_json, "spec_json") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let spec: ClassifierSpec = match serde_json::from_str(spec_json) {
            Ok(s) => s,
            Err(e) => return fail(Error::Config(format!("invalid classifier spec: {e}"))),
        };
        let opts = CvOptions {
            folds,
            seed,
            selection: FeatureSelection::All,
        };
        match cross_validate(&(*dataset).inner, &spec, &opts) {
            Ok(report) => out_string(out_text, report.export()),
            Err(e) => fail(e),
        }
    })
}

/// Predicts the dataset with the model and returns the delimited forensic
/// report (header `srcip,sport,dstip,dsport,proto,label,rule_id`). Every
/// record must carry flow identifiers.
///
/// # Safety
/// `model` and `dataset` must be live handles; `out_text` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_attribute(
    model: *const FfModel,
    dataset: *const FfDataset,
    seed: u64,
    out_text: *mut *mut c_char,
) -> FfStatus {
    guard(|| {
        require_nonnull!(model, "model");
        require_nonnull!(dataset, "dataset");
        require_nonnull!(out_text, "out_text");
        let pipeline = &(*model).inner;
        let view = match pipeline.transform(&(*dataset).inner) {
            Ok(v) => v,
            Err(e) => return fail(e),
        };
        let attributed = match attribute_flows(&view, &pipeline.model) {
            Ok(a) => a,
            Err(e) => return fail(e),
        };
        let meta = ReportMeta {
            dataset_id: "capi".into(),
            seed,
            params: pipeline.model.tag().to_string(),
        };
        let report = ForensicReport::build(attributed, pipeline.model.tag(), meta, GroupBy::Source);
        out_string(out_text, emit_report(&report, ReportFormat::Delimited))
    })
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must have been returned by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn ff_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
