//! C ABI for the neuboots library.
//!
//! The surface is a handle-based wrapper around the bootstrap generator:
//! train (or load) a model behind an opaque `NbModel`, draw bootstrapped
//! predictions into caller-owned buffers, and persist models. Every function
//! returns an [`NbStatus`] code; `nb_last_error_message` exposes the
//! thread-local message for the most recent failure.
//!
//! The generated header lands in `include/neuboots.h` at build time.

use std::cell::RefCell;
use std::ffi::{CStr, CString, c_char};
use std::panic::{AssertUnwindSafe, catch_unwind};
use std::path::PathBuf;

use neuboots::Error;
use neuboots::data::{Dataset, Task};
use neuboots::generator::{AlphaSampling, GeneratorNet, TrainConfig, fit_generator};
use neuboots::matrix::Matrix;
use neuboots::model_io::{ModelFile, load_model, save_model};
use neuboots::nn::{Activation, ArchSpec, LossKind, LrSchedule, SgdConfig};
use neuboots::rng::seeded_rng;

/// Status codes returned by every FFI function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NbStatus {
    NbOk = 0,
    /// A required pointer argument was null.
    NbErrNullArgument = 1,
    /// An argument failed validation (shape, range, enum value).
    NbErrInvalidArgument = 2,
    /// Input data was rejected (non-finite values, bad labels).
    NbErrData = 3,
    /// Training or evaluation failed numerically.
    NbErrNumeric = 4,
    /// File I/O or model (de)serialization failed.
    NbErrIo = 5,
    /// A string was not valid UTF-8.
    NbErrUtf8 = 6,
    /// Unexpected internal failure (a panic was caught).
    NbErrInternal = 7,
}

/// Learning-rate schedule selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NbLrSchedule {
    NbLrConstant = 0,
    NbLrCosineAnnealing = 1,
}

/// Hidden-layer activation selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NbActivation {
    NbActRelu = 0,
    NbActTanh = 1,
    NbActIdentity = 2,
}

/// SGD hyperparameters for `nb_model_train_*`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NbSgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_schedule: NbLrSchedule,
    pub seed: u64,
}

/// Opaque model handle. Created by the `nb_model_train_*` and
/// `nb_model_load` constructors, released with `nb_model_free`.
pub struct NbModel {
    net: GeneratorNet,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> NbStatus {
    if err.is_numerical_error() {
        NbStatus::NbErrNumeric
    } else if err.is_data_error() {
        NbStatus::NbErrData
    } else {
        match err {
            Error::Io(_) | Error::Json(_) => NbStatus::NbErrIo,
            _ => NbStatus::NbErrInvalidArgument,
        }
    }
}

fn fail(err: &Error) -> NbStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn guarded<F: FnOnce() -> NbStatus>(f: F) -> NbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(&format!("internal panic: {msg}"));
            NbStatus::NbErrInternal
        }
    }
}

/// Message for the most recent error on this thread. The pointer stays valid
/// until the next failing call on the same thread. Never null.
#[unsafe(no_mangle)]
pub extern "C" fn nb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static C string.
#[unsafe(no_mangle)]
pub extern "C" fn nb_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

fn activation_of(a: NbActivation) -> Activation {
    match a {
        NbActivation::NbActRelu => Activation::Relu,
        NbActivation::NbActTanh => Activation::Tanh,
        NbActivation::NbActIdentity => Activation::Identity,
    }
}

fn sgd_of(cfg: &NbSgdConfig) -> Result<SgdConfig, Error> {
    SgdConfig::new(
        cfg.learning_rate,
        cfg.momentum,
        cfg.weight_decay,
        cfg.batch_size,
        cfg.epochs,
        match cfg.lr_schedule {
            NbLrSchedule::NbLrConstant => LrSchedule::Constant,
            NbLrSchedule::NbLrCosineAnnealing => LrSchedule::CosineAnnealing,
        },
        cfg.seed,
    )
}

/// Build the feature matrix from a row-major buffer.
unsafe fn matrix_from_raw(x: *const f64, rows: usize, cols: usize) -> Result<Matrix, Error> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidData("empty feature matrix".into()));
    }
    let data = unsafe { std::slice::from_raw_parts(x, rows * cols) };
    Matrix::from_flat(rows, cols, data.to_vec())
}

#[allow(clippy::too_many_arguments)]
unsafe fn train_common(
    x: *const f64,
    n: usize,
    p: usize,
    hidden: *const usize,
    hidden_len: usize,
    activation: NbActivation,
    cfg: *const NbSgdConfig,
    seed: u64,
    out: *mut *mut NbModel,
    dataset_of: impl FnOnce(Matrix) -> Result<Dataset, Error>,
) -> NbStatus {
    if x.is_null() || hidden.is_null() || cfg.is_null() || out.is_null() {
        set_error("null pointer argument");
        return NbStatus::NbErrNullArgument;
    }
    if hidden_len == 0 {
        set_error("the generator needs at least one hidden layer");
        return NbStatus::NbErrInvalidArgument;
    }
    let hidden = unsafe { std::slice::from_raw_parts(hidden, hidden_len) }.to_vec();
    let cfg = unsafe { &*cfg };

    let result = (|| -> Result<GeneratorNet, Error> {
        let features = unsafe { matrix_from_raw(x, n, p) }?;
        let data = dataset_of(features)?;
        let arch = ArchSpec::new(p, hidden, activation_of(activation), data.task());
        let loss = match data.task() {
            Task::Regression { .. } => LossKind::Mse,
            Task::Classification { .. } => LossKind::CrossEntropy,
        };
        let train_cfg = TrainConfig {
            sgd: sgd_of(cfg)?,
            loss,
            alpha: AlphaSampling::Dirichlet,
        };
        let (net, _, _) = fit_generator(&data, &arch, &train_cfg, seed)?;
        Ok(net)
    })();

    match result {
        Ok(net) => {
            unsafe { *out = Box::into_raw(Box::new(NbModel { net })) };
            NbStatus::NbOk
        }
        Err(e) => fail(&e),
    }
}

/// Train a regression generator.
///
/// `x` is row-major `n x p`; `y` is row-major `n x output_dim`. On success
/// `*out` owns the model; release it with `nb_model_free`.
///
/// # Safety
/// `x` must point to `n * p` readable doubles, `y` to `n * output_dim`,
/// `hidden` to `hidden_len` readable values; `cfg` and `out` must be valid.
#[unsafe(no_mangle)]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn nb_model_train_regression(
    x: *const f64,
    n: usize,
    p: usize,
    y: *const f64,
    output_dim: usize,
    hidden: *const usize,
    hidden_len: usize,
    activation: NbActivation,
    cfg: *const NbSgdConfig,
    seed: u64,
    out: *mut *mut NbModel,
) -> NbStatus {
    guarded(|| {
        if y.is_null() {
            set_error("null pointer argument");
            return NbStatus::NbErrNullArgument;
        }
        unsafe {
            train_common(x, n, p, hidden, hidden_len, activation, cfg, seed, out, |features| {
                let targets = matrix_from_raw(y, n, output_dim)?;
                Dataset::regression(features, targets)
            })
        }
    })
}

/// Train a classification generator.
///
/// `labels` are class indices in `[0, classes)`, one per row of `x`.
///
/// # Safety
/// `x` must point to `n * p` readable doubles, `labels` to `n` readable
/// values, `hidden` to `hidden_len`; `cfg` and `out` must be valid.
#[unsafe(no_mangle)]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn nb_model_train_classification(
    x: *const f64,
    n: usize,
    p: usize,
    labels: *const u32,
    classes: usize,
    hidden: *const usize,
    hidden_len: usize,
    activation: NbActivation,
    cfg: *const NbSgdConfig,
    seed: u64,
    out: *mut *mut NbModel,
) -> NbStatus {
    guarded(|| {
        if labels.is_null() {
            set_error("null pointer argument");
            return NbStatus::NbErrNullArgument;
        }
        let labels = unsafe { std::slice::from_raw_parts(labels, n) }
            .iter()
            .map(|&l| l as usize)
            .collect::<Vec<_>>();
        unsafe {
            train_common(x, n, p, hidden, hidden_len, activation, cfg, seed, out, |features| {
                Dataset::classification(features, labels, classes)
            })
        }
    })
}

/// Draw `b` bootstrapped predictions for every row of `x`.
///
/// `out` receives `b * m * output_dim` doubles laid out as
/// `out[draw][row][dim]` (post-softmax probabilities for classification, raw
/// outputs for regression).
///
/// # Safety
/// `model` must be a live handle; `x` must point to `m * p` readable doubles
/// and `out` to `b * m * output_dim` writable doubles.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn nb_model_predict(
    model: *const NbModel,
    x: *const f64,
    m: usize,
    p: usize,
    b: usize,
    seed: u64,
    out: *mut f64,
) -> NbStatus {
    guarded(|| {
        if model.is_null() || x.is_null() || out.is_null() {
            set_error("null pointer argument");
            return NbStatus::NbErrNullArgument;
        }
        if b == 0 {
            set_error("need at least one bootstrap draw");
            return NbStatus::NbErrInvalidArgument;
        }
        let model = unsafe { &*model };
        let result = (|| -> Result<(), Error> {
            let features = unsafe { matrix_from_raw(x, m, p) }?;
            let mut rng = seeded_rng(seed);
            let alphas = model.net.draw_alphas(b, &mut rng);
            let d = model.net.output_dim();
            let cache = model.net.cache_features(&features)?;
            let out_slice = unsafe { std::slice::from_raw_parts_mut(out, b * m * d) };
            for (bi, alpha) in alphas.iter().enumerate() {
                let pred = model.net.predict_cached(&cache, alpha)?;
                let dst = &mut out_slice[bi * m * d..(bi + 1) * m * d];
                dst.copy_from_slice(pred.as_slice());
            }
            Ok(())
        })();
        match result {
            Ok(()) => NbStatus::NbOk,
            Err(e) => fail(&e),
        }
    })
}

/// Deterministic prediction (the unit weight vector): `m * output_dim`
/// doubles into `out`.
///
/// # Safety
/// `model` must be a live handle; `x` must point to `m * p` readable doubles
/// and `out` to `m * output_dim` writable doubles.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn nb_model_predict_mean(
    model: *const NbModel,
    x: *const f64,
    m: usize,
    p: usize,
    out: *mut f64,
) -> NbStatus {
    guarded(|| {
        if model.is_null() || x.is_null() || out.is_null() {
            set_error("null pointer argument");
            return NbStatus::NbErrNullArgument;
        }
        let model = unsafe { &*model };
        let result = (|| -> Result<(), Error> {
            let features = unsafe { matrix_from_raw(x, m, p) }?;
            let pred = model.net.compose().forward(&features)?;
            let out_slice =
                unsafe { std::slice::from_raw_parts_mut(out, m * model.net.output_dim()) };
            out_slice.copy_from_slice(pred.as_slice());
            Ok(())
        })();
        match result {
            Ok(()) => NbStatus::NbOk,
            Err(e) => fail(&e),
        }
    })
}

fn path_from_c(path: *const c_char) -> Result<PathBuf, NbStatus> {
    if path.is_null() {
        set_error("null path");
        return Err(NbStatus::NbErrNullArgument);
    }
    let cstr = unsafe { CStr::from_ptr(path) };
    match cstr.to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(NbStatus::NbErrUtf8)
        }
    }
}

/// Save the model (`.json` extension selects JSON, else the flat binary).
///
/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn nb_model_save(model: *const NbModel, path: *const c_char) -> NbStatus {
    guarded(|| {
        if model.is_null() {
            set_error("null pointer argument");
            return NbStatus::NbErrNullArgument;
        }
        let path = match path_from_c(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let model = unsafe { &*model };
        match save_model(&path, &ModelFile::Generator(model.net.clone())) {
            Ok(()) => NbStatus::NbOk,
            Err(e) => fail(&e),
        }
    })
}

/// Load a generator model saved by this library.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn nb_model_load(path: *const c_char, out: *mut *mut NbModel) -> NbStatus {
    guarded(|| {
        if out.is_null() {
            set_error("null pointer argument");
            return NbStatus::NbErrNullArgument;
        }
        let path = match path_from_c(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match load_model(&path) {
            Ok(ModelFile::Generator(net)) => {
                unsafe { *out = Box::into_raw(Box::new(NbModel { net })) };
                NbStatus::NbOk
            }
            Ok(other) => {
                set_error(&format!(
                    "expected a generator model, found '{}'",
                    other.kind_name()
                ));
                NbStatus::NbErrInvalidArgument
            }
            Err(e) => fail(&e),
        }
    })
}

/// Input width the model expects; 0 when `model` is null.
#[unsafe(no_mangle)]
pub extern "C" fn nb_model_input_dim(model: *const NbModel) -> usize {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }.net.input_dim()
}

/// Output width per prediction; 0 when `model` is null.
#[unsafe(no_mangle)]
pub extern "C" fn nb_model_output_dim(model: *const NbModel) -> usize {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }.net.output_dim()
}

/// Block count `S`; 0 when `model` is null.
#[unsafe(no_mangle)]
pub extern "C" fn nb_model_num_blocks(model: *const NbModel) -> usize {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }.net.num_blocks()
}

/// Release a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be a pointer previously returned by a constructor of this
/// library, not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn nb_model_free(model: *mut NbModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}
