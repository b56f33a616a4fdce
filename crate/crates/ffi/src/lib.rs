//! C interface to `splitnn`.
//!
//! Objects cross the boundary as opaque handles that the caller releases with
//! the matching `*_free` function. Every function returns an [`SnStatus`];
//! on failure, [`sn_last_error_message`] describes the most recent error on
//! the calling thread. Panics are caught and reported as
//! `SN_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use splitnn::cluster::{cluster_features, DistanceMode, FeatureClustering};
use splitnn::data::{load_with_schema, Dataset, Task};
use splitnn::harness::{train_model, Model};
use splitnn::nn::{HeadMode, TrainConfig};
use splitnn::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Schema = 4,
    MalformedData = 5,
    Shape = 6,
    Divergence = 7,
    Checkpoint = 8,
    Panic = 9,
}

impl From<&Error> for SnStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => SnStatus::Io,
            Error::SchemaNotFound { .. } | Error::Schema { .. } => SnStatus::Schema,
            Error::MalformedData { .. } | Error::EmptyDataset { .. } | Error::InvalidDataset(_) => {
                SnStatus::MalformedData
            }
            Error::Shape { .. } => SnStatus::Shape,
            Error::Divergence { .. } => SnStatus::Divergence,
            Error::Checkpoint(_) => SnStatus::Checkpoint,
            Error::InfeasibleAllocation { .. }
            | Error::EmptyTestSet
            | Error::InvalidConfig(_)
            | Error::MixedMetrics { .. } => SnStatus::InvalidArgument,
        }
    }
}

/// A loaded dataset.
pub struct SnDataset(Dataset);

/// A feature clustering.
pub struct SnClustering(FeatureClustering);

/// A trained model with its preprocessing.
pub struct SnModel(Model);

/// Training settings; obtain defaults from [`sn_train_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SnTrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub total_hidden: usize,
    /// One head over the concatenated branches instead of one head per
    /// branch with averaged outputs.
    pub shared_head: bool,
}

impl From<&SnTrainConfig> for TrainConfig {
    fn from(c: &SnTrainConfig) -> Self {
        TrainConfig {
            learning_rate: c.learning_rate,
            batch_size: c.batch_size,
            epochs: c.epochs,
            seed: c.seed,
            total_hidden: c.total_hidden,
            head_mode: if c.shared_head {
                HeadMode::Shared
            } else {
                HeadMode::PerBranch
            },
            ..TrainConfig::default()
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let mut bytes = message.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(SnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(SnStatus::from(&e), e.to_string())
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(SnStatus::InvalidArgument, message.into())
}

/// Runs `f`, turning errors and panics into a status and a stored message.
fn guard<F>(f: F) -> SnStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SnStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {what}"));
            SnStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(SnStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(SnStatus::NullPointer, format!("{what} is null")))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure(SnStatus::NullPointer, format!("{what} is null")));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

fn into_handle<T>(value: T, out: &mut *mut T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a dataset described by a schema file. `data_path` may be null to
/// use the schema's own data file.
///
/// # Safety
/// Paths must be null or nul-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_dataset_load(
    schema_path: *const c_char,
    data_path: *const c_char,
    out: *mut *mut SnDataset,
) -> SnStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let schema = path_arg(schema_path, "schema_path")?;
        let data = if data_path.is_null() {
            None
        } else {
            Some(path_arg(data_path, "data_path")?)
        };
        let ds = load_with_schema(&schema, data.as_deref())?;
        into_handle(SnDataset(ds), out);
        Ok(())
    })
}

/// Builds a dataset from a row-major `n_rows × n_features` matrix in which
/// NaN marks a missing cell. `num_classes` of 0 makes a regression dataset;
/// otherwise labels must be class indices.
///
/// # Safety
/// `values` must hold `n_rows * n_features` doubles and `labels` `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn sn_dataset_from_arrays(
    values: *const f64,
    labels: *const f64,
    n_rows: usize,
    n_features: usize,
    num_classes: usize,
    out: *mut *mut SnDataset,
) -> SnStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        borrow(values, "values")?;
        borrow(labels, "labels")?;
        let len = n_rows
            .checked_mul(n_features)
            .ok_or_else(|| invalid("matrix size overflows"))?;
        let x = std::slice::from_raw_parts(values, len).to_vec();
        let y = std::slice::from_raw_parts(labels, n_rows).to_vec();
        let task = match num_classes {
            0 => Task::Regression,
            n => Task::Classification { num_classes: n },
        };
        into_handle(
            SnDataset(Dataset::from_row_major("arrays", n_rows, n_features, x, y, task)?),
            out,
        );
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live dataset handle; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_dataset_shape(
    ds: *const SnDataset,
    n_rows: *mut usize,
    n_features: *mut usize,
) -> SnStatus {
    guard(|| {
        let ds = &borrow(ds, "dataset")?.0;
        *out_ptr(n_rows, "n_rows")? = ds.n_rows();
        *out_ptr(n_features, "n_features")? = ds.n_features();
        Ok(())
    })
}

/// Fraction of feature cells that are missing.
///
/// # Safety
/// `ds` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_dataset_missing_fraction(ds: *const SnDataset, out: *mut f64) -> SnStatus {
    guard(|| {
        *out_ptr(out, "out")? = borrow(ds, "dataset")?.0.missing_fraction();
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sn_dataset_free(ds: *mut SnDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Clusters the features of every row by correlation distance (`1 - |r|`
/// when `absolute` is set, else `1 - r`) and cuts the dendrogram at
/// `threshold` times its tallest merge.
///
/// # Safety
/// `ds` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_cluster(
    ds: *const SnDataset,
    threshold: f64,
    absolute: bool,
    out: *mut *mut SnClustering,
) -> SnStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let ds = &borrow(ds, "dataset")?.0;
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(invalid(format!("threshold {threshold} outside (0, 1]")));
        }
        let mode = if absolute {
            DistanceMode::Absolute
        } else {
            DistanceMode::Signed
        };
        let rows: Vec<usize> = (0..ds.n_rows()).collect();
        into_handle(SnClustering(cluster_features(ds, &rows, mode, threshold)), out);
        Ok(())
    })
}

/// # Safety
/// `c` must be a live clustering handle; `k` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_clustering_k(c: *const SnClustering, k: *mut usize) -> SnStatus {
    guard(|| {
        *out_ptr(k, "k")? = borrow(c, "clustering")?.0.k();
        Ok(())
    })
}

/// Copies the cluster index of every feature into `out`, which must hold
/// exactly one entry per feature.
///
/// # Safety
/// `c` must be a live clustering handle; `out` must hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn sn_clustering_assignment(c: *const SnClustering, out: *mut usize, len: usize) -> SnStatus {
    guard(|| {
        let a = borrow(c, "clustering")?.0.assignment();
        out_ptr(out, "out")?;
        if len != a.len() {
            return Err(Failure(
                SnStatus::Shape,
                format!("assignment has {} entries, buffer holds {len}", a.len()),
            ));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(a);
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sn_clustering_free(c: *mut SnClustering) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

#[no_mangle]
pub extern "C" fn sn_train_config_default() -> SnTrainConfig {
    let c = TrainConfig::default();
    SnTrainConfig {
        learning_rate: c.learning_rate,
        batch_size: c.batch_size,
        epochs: c.epochs,
        seed: c.seed,
        total_hidden: c.total_hidden,
        shared_head: c.head_mode == HeadMode::Shared,
    }
}

/// Trains on every row of `ds`. A null `clustering` trains the vanilla
/// single-branch network.
///
/// # Safety
/// Handles must be live or (for `clustering`) null; `config` must point to a
/// valid config; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_model_train(
    ds: *const SnDataset,
    clustering: *const SnClustering,
    config: *const SnTrainConfig,
    out: *mut *mut SnModel,
) -> SnStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let ds = &borrow(ds, "dataset")?.0;
        let config = TrainConfig::from(borrow(config, "config")?);
        let clustering = clustering.as_ref().map(|c| &c.0);
        let rows: Vec<usize> = (0..ds.n_rows()).collect();
        let trained = train_model(ds, &rows, &[], clustering, &config)?;
        into_handle(SnModel(trained.model), out);
        Ok(())
    })
}

/// Number of values predicted per row: class count, or 1 for regression.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_model_output_dim(model: *const SnModel, out: *mut usize) -> SnStatus {
    guard(|| {
        *out_ptr(out, "out")? = borrow(model, "model")?.0.network.output_dim();
        Ok(())
    })
}

/// Writes fused predictions for every row of `ds` into `out`, row-major,
/// `n_rows × output_dim`.
///
/// # Safety
/// Handles must be live; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sn_model_predict(
    model: *const SnModel,
    ds: *const SnDataset,
    out: *mut f64,
    len: usize,
) -> SnStatus {
    guard(|| {
        let model = &borrow(model, "model")?.0;
        let ds = &borrow(ds, "dataset")?.0;
        out_ptr(out, "out")?;
        let rows: Vec<usize> = (0..ds.n_rows()).collect();
        let pred = model.predict(ds, &rows)?;
        if len != pred.len() {
            return Err(Failure(
                SnStatus::Shape,
                format!("predictions have {} values, buffer holds {len}", pred.len()),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(out, len);
        for (d, s) in dst.iter_mut().zip(pred.iter()) {
            *d = *s;
        }
        Ok(())
    })
}

/// Accuracy (classification) or RMSE (regression) over every row of `ds`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_model_evaluate(model: *const SnModel, ds: *const SnDataset, out: *mut f64) -> SnStatus {
    guard(|| {
        let model = &borrow(model, "model")?.0;
        let ds = &borrow(ds, "dataset")?.0;
        let rows: Vec<usize> = (0..ds.n_rows()).collect();
        *out_ptr(out, "out")? = model.evaluate(ds, &rows)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sn_model_save(model: *const SnModel, path: *const c_char) -> SnStatus {
    guard(|| {
        let model = &borrow(model, "model")?.0;
        model.save(&path_arg(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_model_load(path: *const c_char, out: *mut *mut SnModel) -> SnStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let model = Model::load(Path::new(&path_arg(path, "path")?))?;
        into_handle(SnModel(model), out);
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sn_model_free(model: *mut SnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
