//! C ABI over `mfuse`.
//!
//! Every function returns an [`MfuseStatus`]; on failure the message is
//! available from [`mfuse_last_error`] on the same thread. Models are opaque
//! [`MfuseModel`] handles released with [`mfuse_model_free`]. Panics are
//! caught at the boundary and reported as [`MfuseStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use mfuse::autodiff::{ParamStore, Tensor};
use mfuse::evaluation::{auc_roc, balanced_accuracy, f_scores, score_dataset, ScoredExample};
use mfuse::fusion::{FusionModel, FusionModelConfig, InputMask, ModelKind};
use mfuse::training::{class_weights, Sample};
use mfuse::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfuseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Numeric = 5,
    Metric = 6,
    Io = 7,
    Panic = 8,
}

pub const MFUSE_INPUT_TWEET_TEXT: u32 = 1;
pub const MFUSE_INPUT_IMAGE_TEXT: u32 = 2;
pub const MFUSE_INPUT_IMAGE: u32 = 4;

/// A model and its parameters.
pub struct MfuseModel {
    model: FusionModel,
    params: ParamStore,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MfuseStatus {
    match e {
        Error::Config(_) | Error::UnknownPrimitive(_) | Error::Attribute { .. } => MfuseStatus::Config,
        Error::Data(_) => MfuseStatus::Data,
        Error::Shape { .. } | Error::Graph(_) | Error::Numeric(_) => MfuseStatus::Numeric,
        Error::Metric(_) => MfuseStatus::Metric,
        Error::Io { .. } => MfuseStatus::Io,
    }
}

struct Fail(MfuseStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(MfuseStatus::InvalidArgument, msg.into())
}

fn guard<F>(f: F) -> MfuseStatus
where
    F: FnOnce() -> Result<(), Fail>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MfuseStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MfuseStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(MfuseStatus::NullPointer, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("`{name}` is not UTF-8")))
}

/// Slice view that tolerates a null pointer for an empty slice.
unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(slice::from_raw_parts(p, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mfuse_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length, 0 if there is none.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn mfuse_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates a freshly initialized model.
///
/// `variant` is one of `lstm`, `fcm`, `scm`, `tkm`; `profile` one of `desk`,
/// `paper`, `synth` (the synth profile uses 16-pixel images).
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfuse_model_new(
    variant: *const c_char,
    profile: *const c_char,
    vocab_size: usize,
    seed: u64,
    out: *mut *mut MfuseModel,
) -> MfuseStatus {
    guard(|| {
        non_null(out, "out")?;
        let kind: ModelKind = str_arg(variant, "variant")?.parse()?;
        let config = match str_arg(profile, "profile")? {
            "desk" => FusionModelConfig::desk(kind, vocab_size),
            "paper" => FusionModelConfig::paper(kind, vocab_size),
            "synth" => FusionModelConfig::synth(kind, vocab_size, 16),
            other => return Err(invalid(format!("unknown profile `{other}`"))),
        };
        let model = FusionModel::new(config)?;
        let params = model.init(seed);
        *out = Box::into_raw(Box::new(MfuseModel { model, params }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`mfuse_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mfuse_model_free(model: *mut MfuseModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of trainable scalars.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfuse_model_parameter_count(model: *const MfuseModel, out: *mut usize) -> MfuseStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        *out = (*model).params.iter().filter(|(_, p)| p.trainable).map(|(_, p)| p.value.len()).sum();
        Ok(())
    })
}

/// Replaces the parameters with a checkpoint that matches the model exactly.
///
/// # Safety
/// `model` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mfuse_model_load(model: *mut MfuseModel, path: *const c_char) -> MfuseStatus {
    guard(|| {
        non_null(model, "model")?;
        let ckpt = ParamStore::load(Path::new(str_arg(path, "path")?))?;
        let m = &mut *model;
        let mut params = m.params.clone();
        let mismatch = |detail: String| Fail(MfuseStatus::Config, format!("checkpoint does not match the model: {detail}"));
        let copied = params.load_matching(&ckpt).map_err(|e| mismatch(e.to_string()))?;
        if copied != params.len() || ckpt.len() != params.len() {
            return Err(mismatch(format!("{} of {} entries shared", copied, params.len())));
        }
        m.params = params;
        Ok(())
    })
}

/// Writes the parameters as a checkpoint file.
///
/// # Safety
/// `model` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mfuse_model_save(model: *const MfuseModel, path: *const c_char) -> MfuseStatus {
    guard(|| {
        non_null(model, "model")?;
        (*model).params.save(Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Token sequences in compressed form: sequence `i` is
/// `tokens[offsets[i] .. offsets[i + 1]]`.
unsafe fn sequences(tokens: *const u32, offsets: *const usize, n: usize, vocab: usize, name: &str) -> Result<Vec<Vec<usize>>, Fail> {
    let offsets = slice_arg(offsets, n + 1, name)?;
    if offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid(format!("`{name}` offsets decrease")));
    }
    let tokens = slice_arg(tokens, offsets[n], name)?;
    if let Some(t) = tokens.iter().find(|&&t| t as usize >= vocab) {
        return Err(invalid(format!("`{name}` token {t} outside vocabulary of {vocab}")));
    }
    Ok(offsets.windows(2).map(|w| tokens[w[0]..w[1]].iter().map(|&t| t as usize).collect()).collect())
}

/// Eval-mode hate probabilities for `n` examples.
///
/// `images` holds `n` RGB images of `height × width × 3` values in `[0, 1]`,
/// row-major; it may be null for the text-only variant. `inputs` is a bit
/// set of `MFUSE_INPUT_*`; unavailable inputs are zero-masked. Scores are
/// written to `out_scores[0..n]`.
///
/// # Safety
/// Pointers must be valid for the lengths implied by `n`, the offsets and the
/// image size.
#[no_mangle]
pub unsafe extern "C" fn mfuse_model_score(
    model: *const MfuseModel,
    n: usize,
    images: *const f64,
    height: usize,
    width: usize,
    tweet_tokens: *const u32,
    tweet_offsets: *const usize,
    image_text_tokens: *const u32,
    image_text_offsets: *const usize,
    inputs: u32,
    out_scores: *mut f64,
) -> MfuseStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out_scores, "out_scores")?;
        if n == 0 {
            return Ok(());
        }
        let m = &*model;
        let vocab = m.model.config.text.vocab_size;
        let mask = InputMask {
            tweet_text: inputs & MFUSE_INPUT_TWEET_TEXT != 0,
            image_text: inputs & MFUSE_INPUT_IMAGE_TEXT != 0,
            image: inputs & MFUSE_INPUT_IMAGE != 0,
        };
        mask.validate()?;
        let tweets = sequences(tweet_tokens, tweet_offsets, n, vocab, "tweet")?;
        let image_texts = sequences(image_text_tokens, image_text_offsets, n, vocab, "image_text")?;
        let per_image = height * width * 3;
        let pixels = if images.is_null() {
            if m.model.config.kind.uses_image() {
                return Err(invalid("this variant needs images"));
            }
            None
        } else {
            if per_image == 0 {
                return Err(invalid("image size must be positive"));
            }
            Some(slice_arg(images, n * per_image, "images")?)
        };
        let samples: Vec<Sample> = (0..n)
            .map(|i| -> Result<Sample, Fail> {
                let image = match pixels {
                    Some(p) => Some(Tensor::new(vec![height, width, 3], p[i * per_image..(i + 1) * per_image].to_vec())?),
                    None => None,
                };
                Ok(Sample {
                    id: i.to_string(),
                    image,
                    tweet: tweets[i].clone(),
                    image_text: image_texts[i].clone(),
                    label: 0,
                })
            })
            .collect::<Result<_, _>>()?;
        let scored = score_dataset(&m.model, &m.params, &samples, mask, 64)?;
        let out = slice::from_raw_parts_mut(out_scores, n);
        for (o, s) in out.iter_mut().zip(&scored) {
            *o = s.score;
        }
        Ok(())
    })
}

unsafe fn scored(scores: *const f64, labels: *const u8, n: usize) -> Result<Vec<ScoredExample>, Fail> {
    let s = slice_arg(scores, n, "scores")?;
    let l = slice_arg(labels, n, "labels")?;
    Ok(s.iter()
        .zip(l)
        .enumerate()
        .map(|(i, (&score, &label))| ScoredExample::new(i.to_string(), score, label != 0))
        .collect())
}

/// Area under the ROC curve; ties count one half. Labels are nonzero for hate.
///
/// # Safety
/// `scores` and `labels` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfuse_auc_roc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> MfuseStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = auc_roc(&scored(scores, labels, n)?)?;
        Ok(())
    })
}

/// Maximum F1 of the hate class over all thresholds, and the threshold
/// reaching it (`out_threshold` may be null).
///
/// # Safety
/// `scores` and `labels` must hold `n` values; `out_f1` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfuse_max_f1(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out_f1: *mut f64,
    out_threshold: *mut f64,
) -> MfuseStatus {
    guard(|| {
        non_null(out_f1, "out_f1")?;
        let f = f_scores(&scored(scores, labels, n)?)?;
        *out_f1 = f.max_f1;
        if !out_threshold.is_null() {
            *out_threshold = f.best_threshold;
        }
        Ok(())
    })
}

/// Mean per-class recall in percent, predicting hate when `score >= threshold`.
///
/// # Safety
/// `scores` and `labels` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mfuse_balanced_accuracy(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    threshold: f64,
    out: *mut f64,
) -> MfuseStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = balanced_accuracy(&scored(scores, labels, n)?, threshold)?;
        Ok(())
    })
}

/// Inverse-frequency class weights `N / (C · n_c)` for `n_classes` counts.
///
/// # Safety
/// `counts` and `out` must hold `n_classes` values.
#[no_mangle]
pub unsafe extern "C" fn mfuse_class_weights(counts: *const usize, n_classes: usize, out: *mut f64) -> MfuseStatus {
    guard(|| {
        let c = slice_arg(counts, n_classes, "counts")?;
        non_null(out, "out")?;
        let w = class_weights(c)?;
        slice::from_raw_parts_mut(out, n_classes).copy_from_slice(&w);
        Ok(())
    })
}
