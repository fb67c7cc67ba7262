//! C ABI over `lrptext`.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `_free` function. Every fallible call returns an [`LrpStatus`];
//! on failure a human-readable message is kept per thread and can be copied
//! out with [`lrp_last_error_message`].
//!
//! Embedding matrices cross the boundary column-major: word `t` occupies
//! `x[t * dim .. (t + 1) * dim]`, i.e. the word vectors are concatenated.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lrptext::embeddings::EmbeddingTable;
use lrptext::persist::SavedModel;
use lrptext::relevance::{self, Method};
use lrptext::Error;
use ndarray::{Array2, ShapeBuilder};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Format = 4,
    DimMismatch = 5,
    InvalidArgument = 6,
    NotFound = 7,
    Degenerate = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrpMethod {
    Lrp = 0,
    Sa = 1,
    SaL2 = 2,
}

impl From<LrpMethod> for Method {
    fn from(m: LrpMethod) -> Self {
        match m {
            LrpMethod::Lrp => Method::Lrp,
            LrpMethod::Sa => Method::Sa,
            LrpMethod::SaL2 => Method::SaL2,
        }
    }
}

/// A trained classifier together with its label names.
pub struct LrpModel {
    saved: SavedModel,
}

/// A word-embedding lookup table.
pub struct LrpTable {
    table: EmbeddingTable,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

struct Failure(LrpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => LrpStatus::Io,
            Error::Format { .. } | Error::Json(_) | Error::ModelVersion { .. } | Error::InvalidModel(_) => {
                LrpStatus::Format
            }
            Error::DimMismatch { .. } | Error::TooShort { .. } => LrpStatus::DimMismatch,
            Error::DegenerateDenominator { .. } | Error::DegenerateData(_) => LrpStatus::Degenerate,
            _ => LrpStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: LrpStatus, message: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, message.into()))
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> LrpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => LrpStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LrpStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    match p.as_ref() {
        Some(r) => Ok(r),
        None => fail(LrpStatus::NullPointer, format!("{what} is null")),
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    match p.as_mut() {
        Some(r) => Ok(r),
        None => fail(LrpStatus::NullPointer, format!("{what} is null")),
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(LrpStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p).to_str().or_else(|_| fail(LrpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// Copies `text` plus a terminating NUL into `buf`. `required` always
/// receives the needed size including the NUL.
unsafe fn copy_out(text: &str, buf: *mut c_char, len: usize, required: *mut usize) -> Result<(), Failure> {
    let need = text.len() + 1;
    if let Some(r) = required.as_mut() {
        *r = need;
    }
    if buf.is_null() || len < need {
        return fail(LrpStatus::BufferTooSmall, format!("{need} bytes required"));
    }
    ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
    *buf.add(text.len()) = 0;
    Ok(())
}

/// Copies the calling thread's last error message into `buf`.
///
/// Returns the buffer size needed, including the NUL. Nothing is written
/// when `buf` is null or too small.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn lrp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let message = e.borrow();
        let mut need = 0;
        let _ = copy_out(&message, buf, len, &mut need);
        need
    })
}

/// Loads a model file written by `lrptext train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lrp_model_load(path: *const c_char, out: *mut *mut LrpModel) -> LrpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let saved = SavedModel::load(Path::new(c_str(path, "path")?))?;
        *out = Box::into_raw(Box::new(LrpModel { saved }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`lrp_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lrp_model_free(model: *mut LrpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Reports the embedding dimension, filter count and class count.
///
/// # Safety
/// `model` must be a live handle; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn lrp_model_dims(
    model: *const LrpModel,
    embedding_dim: *mut usize,
    filters: *mut usize,
    classes: *mut usize,
) -> LrpStatus {
    guard(|| {
        let dims = non_null(model, "model")?.saved.model.dims();
        for (p, v) in [(embedding_dim, dims.embedding), (filters, dims.filters), (classes, dims.classes)] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copies the name of class `index` into `buf` (NUL-terminated).
///
/// # Safety
/// `model` must be a live handle, `buf` null or valid for `len` bytes,
/// `required` null or valid.
#[no_mangle]
pub unsafe extern "C" fn lrp_model_label(
    model: *const LrpModel,
    index: usize,
    buf: *mut c_char,
    len: usize,
    required: *mut usize,
) -> LrpStatus {
    guard(|| {
        let labels = &non_null(model, "model")?.saved.labels;
        match labels.get(index) {
            Some(label) => copy_out(label, buf, len, required),
            None => fail(LrpStatus::InvalidArgument, format!("class {index} out of range ({} classes)", labels.len())),
        }
    })
}

unsafe fn input_matrix(model: &LrpModel, x: *const f64, n_words: usize) -> Result<Array2<f64>, Failure> {
    if x.is_null() {
        return fail(LrpStatus::NullPointer, "x is null");
    }
    if n_words < 2 {
        return fail(LrpStatus::DimMismatch, format!("{n_words} words given, at least 2 are required"));
    }
    let d = model.saved.model.dims().embedding;
    let data = std::slice::from_raw_parts(x, d * n_words).to_vec();
    Ok(Array2::from_shape_vec((d, n_words).f(), data).expect("shape matches length"))
}

/// Classifies one document.
///
/// `x` holds `n_words` word vectors of the model's embedding dimension.
/// `scores` may be null; otherwise it must have room for `scores_len`
/// values and receives the class scores.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn lrp_model_predict(
    model: *const LrpModel,
    x: *const f64,
    n_words: usize,
    predicted: *mut usize,
    scores: *mut f64,
    scores_len: usize,
) -> LrpStatus {
    guard(|| {
        let model = non_null(model, "model")?;
        let predicted = out_ref(predicted, "predicted")?;
        let x = input_matrix(model, x, n_words)?;
        let (class, s) = model.saved.model.predict(x.view())?;
        if !scores.is_null() {
            if scores_len < s.len() {
                return fail(LrpStatus::BufferTooSmall, format!("{} scores required", s.len()));
            }
            std::slice::from_raw_parts_mut(scores, s.len()).copy_from_slice(s.as_slice().unwrap());
        }
        *predicted = class;
        Ok(())
    })
}

/// Computes word relevances of `target` for one document.
///
/// `word_relevance` receives `n_words` values. `dim_relevance` may be null;
/// otherwise it receives the full map in the same column-major layout as
/// `x`. `f_value` (nullable) receives the target score. `epsilon` is used
/// by LRP only.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn lrp_explain(
    model: *const LrpModel,
    x: *const f64,
    n_words: usize,
    target: usize,
    method: LrpMethod,
    epsilon: f64,
    word_relevance: *mut f64,
    dim_relevance: *mut f64,
    f_value: *mut f64,
) -> LrpStatus {
    guard(|| {
        let model = non_null(model, "model")?;
        if word_relevance.is_null() {
            return fail(LrpStatus::NullPointer, "word_relevance is null");
        }
        let classes = model.saved.model.dims().classes;
        if target >= classes {
            return fail(LrpStatus::InvalidArgument, format!("target {target} out of range ({classes} classes)"));
        }
        let x = input_matrix(model, x, n_words)?;
        let map = relevance::explain(&model.saved.model, x.view(), target, method.into(), epsilon)?;
        std::slice::from_raw_parts_mut(word_relevance, n_words).copy_from_slice(&map.per_word);
        if !dim_relevance.is_null() {
            let out = std::slice::from_raw_parts_mut(dim_relevance, map.per_dim.len());
            for (slot, v) in out.iter_mut().zip(map.per_dim.t().iter()) {
                *slot = *v;
            }
        }
        if let Some(f) = f_value.as_mut() {
            *f = map.f_value;
        }
        Ok(())
    })
}

/// Loads a word2vec text-format embedding table.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lrp_table_load(path: *const c_char, out: *mut *mut LrpTable) -> LrpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let table = EmbeddingTable::load(Path::new(c_str(path, "path")?))?;
        *out = Box::into_raw(Box::new(LrpTable { table }));
        Ok(())
    })
}

/// Releases a table. Null is ignored.
///
/// # Safety
/// `table` must come from [`lrp_table_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lrp_table_free(table: *mut LrpTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Vector dimension of the table, 0 for a null handle.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lrp_table_dim(table: *const LrpTable) -> usize {
    table.as_ref().map_or(0, |t| t.table.dim())
}

/// Copies the vector for `token` into `out` (`len` must be at least the
/// table dimension). Returns `NOT_FOUND` for out-of-vocabulary tokens.
///
/// # Safety
/// `table` must be a live handle, `token` NUL-terminated, `out` valid for
/// `len` values.
#[no_mangle]
pub unsafe extern "C" fn lrp_table_lookup(
    table: *const LrpTable,
    token: *const c_char,
    out: *mut f64,
    len: usize,
) -> LrpStatus {
    guard(|| {
        let table = &non_null(table, "table")?.table;
        let token = c_str(token, "token")?;
        if out.is_null() {
            return fail(LrpStatus::NullPointer, "out is null");
        }
        if len < table.dim() {
            return fail(LrpStatus::BufferTooSmall, format!("{} values required", table.dim()));
        }
        match table.get(token) {
            Some(v) => {
                std::slice::from_raw_parts_mut(out, v.len()).copy_from_slice(v);
                Ok(())
            }
            None => fail(LrpStatus::NotFound, format!("{token:?} is not in the table")),
        }
    })
}
