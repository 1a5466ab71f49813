//! C ABI over the foiltree explainer.
//!
//! Objects are opaque handles created by `ft_*` constructors and released
//! with the matching `*_free`. Every fallible call returns an [`FtStatus`];
//! on failure, [`ft_last_error`] describes the most recent error on the
//! calling thread. Strings returned through `char **` out-parameters are
//! owned by the caller and must be released with [`ft_string_free`].
//!
//! Handles are immutable after construction and may be shared between
//! threads for reading.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use foiltree::dataset::{load_csv, split, Dataset, Schema};
use foiltree::explanation::{explain, render_text, ExplainerConfig, Explanation, Verbosity};
use foiltree::models::{fit, ClassifierOracle, Hyperparams, ModelKind, TrainedModel};
use foiltree::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    MalformedCsv = 4,
    UnknownSchema = 5,
    EmptyDataset = 6,
    DegenerateSplit = 7,
    UnknownModelKind = 8,
    InvalidHyperparameter = 9,
    LengthMismatch = 10,
    ArityMismatch = 11,
    FoilEqualsFact = 12,
    ClassOutOfRange = 13,
    InsufficientData = 14,
    LeafNotInTree = 15,
    InconsistentConditions = 16,
    IndexOutOfRange = 17,
    InvalidArgument = 18,
    ModelFormat = 19,
    Panic = 99,
}

impl From<&Error> for FtStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => FtStatus::Io,
            Error::MalformedCsv { .. } => FtStatus::MalformedCsv,
            Error::UnknownSchema(_) => FtStatus::UnknownSchema,
            Error::EmptyDataset => FtStatus::EmptyDataset,
            Error::DegenerateSplit { .. } => FtStatus::DegenerateSplit,
            Error::UnknownModelKind(_) => FtStatus::UnknownModelKind,
            Error::InvalidHyperparameter(_) => FtStatus::InvalidHyperparameter,
            Error::LengthMismatch { .. } => FtStatus::LengthMismatch,
            Error::ArityMismatch { .. } => FtStatus::ArityMismatch,
            Error::FoilEqualsFact(_) => FtStatus::FoilEqualsFact,
            Error::ClassOutOfRange { .. } => FtStatus::ClassOutOfRange,
            Error::InsufficientData(_) => FtStatus::InsufficientData,
            Error::LeafNotInTree(_) => FtStatus::LeafNotInTree,
            Error::InconsistentConditions { .. } => FtStatus::InconsistentConditions,
            Error::IndexOutOfRange { .. } => FtStatus::IndexOutOfRange,
            Error::InvalidArgument(_) => FtStatus::InvalidArgument,
            Error::ModelFormat(_) => FtStatus::ModelFormat,
        }
    }
}

/// A loaded dataset.
pub struct FtDataset(Dataset);

/// A trained classifier.
pub struct FtModel(TrainedModel);

/// A contrastive explanation.
pub struct FtExplanation(Explanation);

/// One merged condition. `has_lower`/`has_upper` are 0 or 1; the bound
/// fields are meaningful only when the flag is set. The condition reads
/// `lower < x[feature] <= upper`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FtLiteral {
    pub feature: usize,
    pub has_lower: c_int,
    pub lower: f64,
    pub has_upper: c_int,
    pub upper: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(FtStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(FtStatus::from(&e), format!("{}: {e}", e.code()))
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            FtStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("PANIC: internal error");
            FtStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(FtStatus::NullPointer, format!("NULL_POINTER: {what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FtStatus::InvalidUtf8, format!("INVALID_UTF8: {what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Message describing the last failed call on this thread, or "" after a
/// successful call. The pointer stays valid until the next `ft_*` call on
/// the same thread; do not free it.
#[no_mangle]
pub extern "C" fn ft_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ft_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a CSV file. `schema` is "iris", "diabetes", "heart" or "generic"
/// (header row, last column is the label).
///
/// # Safety
/// `path` and `schema` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ft_dataset_load(
    path: *const c_char,
    schema: *const c_char,
    out: *mut *mut FtDataset,
) -> FtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let schema: Schema = str_arg(schema, "schema")?.parse()?;
        put(out, FtDataset(load_csv(path, schema)?));
        Ok(())
    })
}

/// Stratified train/test split.
///
/// # Safety
/// `dataset` must be a live handle; `train` and `test` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ft_dataset_split(
    dataset: *const FtDataset,
    test_fraction: f64,
    seed: u64,
    train: *mut *mut FtDataset,
    test: *mut *mut FtDataset,
) -> FtStatus {
    guard(|| {
        let d = handle(dataset, "dataset")?;
        if train.is_null() || test.is_null() {
            return Err(null("train/test"));
        }
        let (tr, te) = split(&d.0, test_fraction, seed)?;
        put(train, FtDataset(tr));
        put(test, FtDataset(te));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ft_dataset_n_instances(dataset: *const FtDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.n_instances())
}

/// # Safety
/// `dataset` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ft_dataset_n_features(dataset: *const FtDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.n_features())
}

/// # Safety
/// `dataset` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ft_dataset_n_classes(dataset: *const FtDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.n_classes())
}

/// Copies row `index` into `out`, which must hold `len == n_features` values;
/// `label` (nullable) receives the class index.
///
/// # Safety
/// `dataset` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ft_dataset_row(
    dataset: *const FtDataset,
    index: usize,
    out: *mut f64,
    len: usize,
    label: *mut usize,
) -> FtStatus {
    guard(|| {
        let d = &handle(dataset, "dataset")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let row = d.x.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: d.n_instances(),
        })?;
        if len != row.len() {
            return Err(Error::ArityMismatch {
                expected: row.len(),
                got: len,
            }
            .into());
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(row);
        if !label.is_null() {
            *label = d.y[index];
        }
        Ok(())
    })
}

/// Name of class `index` as a newly allocated string.
///
/// # Safety
/// `dataset` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ft_dataset_class_name(
    dataset: *const FtDataset,
    index: usize,
    out: *mut *mut c_char,
) -> FtStatus {
    guard(|| {
        let d = &handle(dataset, "dataset")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let name = d.class_names.get(index).ok_or(Error::ClassOutOfRange {
            index,
            n_classes: d.n_classes(),
        })?;
        *out = to_c_string(name.clone());
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ft_dataset_free(dataset: *mut FtDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Trains a model. `kind` is "logistic-regression", "random-forest", "mlp"
/// or "svm"; default hyperparameters are used.
///
/// # Safety
/// `train` must be a live handle; `kind` a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ft_model_fit(
    train: *const FtDataset,
    kind: *const c_char,
    seed: u64,
    out: *mut *mut FtModel,
) -> FtStatus {
    guard(|| {
        let d = &handle(train, "train")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let kind: ModelKind = str_arg(kind, "kind")?.parse()?;
        put(out, FtModel(fit(kind, d, &Hyperparams::new(), seed)?));
        Ok(())
    })
}

/// Predicted class of `x` (length `len`).
///
/// # Safety
/// `model` must be a live handle; `x` must hold `len` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ft_model_predict(
    model: *const FtModel,
    x: *const f64,
    len: usize,
    out: *mut usize,
) -> FtStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        let x = slice_arg(x, len, "x")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if len != m.n_features() {
            return Err(Error::ArityMismatch {
                expected: m.n_features(),
                got: len,
            }
            .into());
        }
        *out = m.predict(x);
        Ok(())
    })
}

/// Serializes the model to JSON.
///
/// # Safety
/// `model` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ft_model_to_json(model: *const FtModel, out: *mut *mut c_char) -> FtStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = to_c_string(m.to_json());
        Ok(())
    })
}

/// Restores a model from [`ft_model_to_json`] output.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ft_model_from_json(json: *const c_char, out: *mut *mut FtModel) -> FtStatus {
    guard(|| {
        let s = str_arg(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, FtModel(TrainedModel::from_json(s)?));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ft_model_free(model: *mut FtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Explains why `model` assigns `x` its class rather than `foil`.
/// A negative `foil` selects the second most likely class. `config_json`
/// may be null for defaults, or a JSON explainer configuration.
///
/// # Safety
/// `model` and `train` must be live handles; `x` must hold `len` doubles;
/// `config_json` null or NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ft_explain(
    model: *const FtModel,
    train: *const FtDataset,
    x: *const f64,
    len: usize,
    foil: i64,
    seed: u64,
    config_json: *const c_char,
    out: *mut *mut FtExplanation,
) -> FtStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        let d = &handle(train, "train")?.0;
        let x = slice_arg(x, len, "x")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = if config_json.is_null() {
            ExplainerConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?)
                .map_err(|e| Error::InvalidArgument(format!("bad explainer config: {e}")))?
        };
        let foil = usize::try_from(foil).ok();
        put(out, FtExplanation(explain(m, d, x, foil, &config, seed)?));
        Ok(())
    })
}

/// # Safety
/// `e` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ft_explanation_fact(e: *const FtExplanation) -> usize {
    e.as_ref().map_or(0, |e| e.0.fact)
}

/// # Safety
/// `e` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ft_explanation_foil(e: *const FtExplanation) -> usize {
    e.as_ref().map_or(0, |e| e.0.foil)
}

/// Number of literals.
///
/// # Safety
/// `e` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ft_explanation_len(e: *const FtExplanation) -> usize {
    e.as_ref().map_or(0, |e| e.0.literals.len())
}

/// 1 if the instance already sits in a foil-labelled leaf, else 0.
///
/// # Safety
/// `e` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ft_explanation_zero_length(e: *const FtExplanation) -> c_int {
    e.as_ref().map_or(0, |e| e.0.zero_length as c_int)
}

/// Copies literal `index` into `out`.
///
/// # Safety
/// `e` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ft_explanation_literal(
    e: *const FtExplanation,
    index: usize,
    out: *mut FtLiteral,
) -> FtStatus {
    guard(|| {
        let e = &handle(e, "explanation")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let l = e.literals.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: e.literals.len(),
        })?;
        *out = FtLiteral {
            feature: l.feature,
            has_lower: l.lower.is_some() as c_int,
            lower: l.lower.unwrap_or(f64::NEG_INFINITY),
            has_upper: l.upper.is_some() as c_int,
            upper: l.upper.unwrap_or(f64::INFINITY),
        };
        Ok(())
    })
}

/// Serializes the explanation to JSON.
///
/// # Safety
/// `e` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ft_explanation_to_json(e: *const FtExplanation, out: *mut *mut c_char) -> FtStatus {
    guard(|| {
        let e = &handle(e, "explanation")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = to_c_string(e.to_json());
        Ok(())
    })
}

/// Renders the dialogue, one line per `\n`. Class and feature names come
/// from `dataset`. `quantitative` non-zero adds the thresholds.
///
/// # Safety
/// `e` and `dataset` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ft_explanation_render(
    e: *const FtExplanation,
    dataset: *const FtDataset,
    quantitative: c_int,
    out: *mut *mut c_char,
) -> FtStatus {
    guard(|| {
        let e = &handle(e, "explanation")?.0;
        let d = &handle(dataset, "dataset")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let verbosity = if quantitative != 0 {
            Verbosity::Quantitative
        } else {
            Verbosity::Qualitative
        };
        *out = to_c_string(render_text(e, &d.class_names, &d.features, verbosity).join("\n"));
        Ok(())
    })
}

/// # Safety
/// `e` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ft_explanation_free(e: *mut FtExplanation) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Stable machine-readable name of a status, e.g. "FOIL_EQUALS_FACT".
/// The returned string is static.
#[no_mangle]
pub extern "C" fn ft_status_name(status: FtStatus) -> *const c_char {
    let s: &'static CStr = match status {
        FtStatus::Ok => c"OK",
        FtStatus::NullPointer => c"NULL_POINTER",
        FtStatus::InvalidUtf8 => c"INVALID_UTF8",
        FtStatus::Io => c"IO_ERROR",
        FtStatus::MalformedCsv => c"MALFORMED_CSV",
        FtStatus::UnknownSchema => c"UNKNOWN_SCHEMA",
        FtStatus::EmptyDataset => c"EMPTY_DATASET",
        FtStatus::DegenerateSplit => c"DEGENERATE_SPLIT",
        FtStatus::UnknownModelKind => c"UNKNOWN_MODEL_KIND",
        FtStatus::InvalidHyperparameter => c"INVALID_HYPERPARAMETER",
        FtStatus::LengthMismatch => c"LENGTH_MISMATCH",
        FtStatus::ArityMismatch => c"ARITY_MISMATCH",
        FtStatus::FoilEqualsFact => c"FOIL_EQUALS_FACT",
        FtStatus::ClassOutOfRange => c"CLASS_OUT_OF_RANGE",
        FtStatus::InsufficientData => c"INSUFFICIENT_DATA",
        FtStatus::LeafNotInTree => c"LEAF_NOT_IN_TREE",
        FtStatus::InconsistentConditions => c"INCONSISTENT_CONDITIONS",
        FtStatus::IndexOutOfRange => c"INDEX_OUT_OF_RANGE",
        FtStatus::InvalidArgument => c"INVALID_ARGUMENT",
        FtStatus::ModelFormat => c"MODEL_FORMAT",
        FtStatus::Panic => c"PANIC",
    };
    s.as_ptr()
}
