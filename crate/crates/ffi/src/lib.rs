//! C ABI over the emojisem library.
//!
//! Every fallible function returns an [`EsStatus`]; on failure a message is
//! available from [`es_last_error`] on the same thread. Handles are opaque
//! and must be released with their matching `*_free` function. Strings
//! returned through `out` parameters are owned by the caller and released
//! with [`es_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use emojisem::analytics;
use emojisem::corpus::{self, PostRecord};
use emojisem::embedding::{self, EmbeddingModel};
use emojisem::emoji::EmojiInventory;
use emojisem::projection;
use emojisem::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    NotFound = 5,
    InvalidArgument = 6,
    Undefined = 7,
    Panic = 8,
}

/// A loaded embedding model.
pub struct EsModel {
    model: EmbeddingModel,
    tokens: Vec<CString>,
}

/// An emoji inventory.
pub struct EsInventory {
    inventory: EmojiInventory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(EsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => EsStatus::Io,
            Error::Parse { .. } | Error::ModelFormat { .. } => EsStatus::Parse,
            Error::NotFound(_) => EsStatus::NotFound,
            Error::ZeroNorm
            | Error::UndefinedCorrelation(_)
            | Error::RankDeficient { .. }
            | Error::DegenerateCategory(_)
            | Error::NonFinite { .. } => EsStatus::Undefined,
            _ => EsStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: EsStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            EsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(EsStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(EsStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(EsStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(EsStatus::NullPointer, format!("{name} is null")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(EsStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(EsStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn es_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from this thread.
#[no_mangle]
pub extern "C" fn es_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn es_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------- models

/// Loads a model file written by the trainer.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn es_model_load(path: *const c_char, out: *mut *mut EsModel) -> EsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let model = embedding::load_model(Path::new(path))?;
        let tokens = model
            .tokens()
            .iter()
            .map(|t| CString::new(t.as_str()).map_err(|_| fail(EsStatus::Parse, "token contains NUL")))
            .collect::<Result<_, _>>()?;
        *out = Box::into_raw(Box::new(EsModel { model, tokens }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`es_model_load`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn es_model_free(model: *mut EsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Vector dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn es_model_dim(model: *const EsModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.dim())
}

/// Vocabulary size, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn es_model_len(model: *const EsModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.len())
}

/// Token at `index`, or null when out of range. Owned by the handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn es_model_token(model: *const EsModel, index: usize) -> *const c_char {
    model
        .as_ref()
        .and_then(|m| m.tokens.get(index))
        .map_or(ptr::null(), |t| t.as_ptr())
}

/// Copies the vector of `token` into `out`, which holds `len` floats; `len`
/// must equal the model dimension.
///
/// # Safety
/// `out` must point to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn es_model_vector(
    model: *const EsModel,
    token: *const c_char,
    out: *mut f32,
    len: usize,
) -> EsStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let token = str_arg(token, "token")?;
        if len != m.model.dim() {
            return Err(fail(
                EsStatus::InvalidArgument,
                format!("buffer holds {len} floats, model dimension is {}", m.model.dim()),
            ));
        }
        let v = m
            .model
            .vector(token)
            .ok_or_else(|| Error::NotFound(token.to_string()))?;
        slice_out(out, len, "out")?.copy_from_slice(v);
        Ok(())
    })
}

/// The `k` nearest tokens of `token` by cosine. Writes up to `k` token
/// indices (see [`es_model_token`]) and scores; `count` receives how many.
///
/// # Safety
/// `indices` and `scores` must each hold `k` writable elements.
#[no_mangle]
pub unsafe extern "C" fn es_model_neighbors(
    model: *const EsModel,
    token: *const c_char,
    k: usize,
    indices: *mut usize,
    scores: *mut f64,
    count: *mut usize,
) -> EsStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let token = str_arg(token, "token")?;
        let count = out_arg(count, "count")?;
        *count = 0;
        let idx = slice_out(indices, k, "indices")?;
        let sc = slice_out(scores, k, "scores")?;
        let found = embedding::neighbors(&m.model, token, k)?;
        for (i, (t, s)) in found.iter().enumerate() {
            idx[i] = m.model.index_of(t).expect("neighbor comes from the model");
            sc[i] = *s;
        }
        *count = found.len();
        Ok(())
    })
}

// ---------------------------------------------------------------- emoji

/// The bundled Emoji 1.0 inventory. Never null.
#[no_mangle]
pub extern "C" fn es_inventory_builtin() -> *mut EsInventory {
    Box::into_raw(Box::new(EsInventory {
        inventory: EmojiInventory::builtin(),
    }))
}

/// Loads an inventory from an emoji-data file and a category map.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn es_inventory_load(
    emoji_data: *const c_char,
    category_map: *const c_char,
    out: *mut *mut EsInventory,
) -> EsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let data = str_arg(emoji_data, "emoji_data")?;
        let map = str_arg(category_map, "category_map")?;
        let inventory = EmojiInventory::load(Path::new(data), Path::new(map))?;
        *out = Box::into_raw(Box::new(EsInventory { inventory }));
        Ok(())
    })
}

/// # Safety
/// `inventory` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn es_inventory_free(inventory: *mut EsInventory) {
    if !inventory.is_null() {
        drop(Box::from_raw(inventory));
    }
}

/// Number of entries, or 0 for a null handle.
///
/// # Safety
/// `inventory` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn es_inventory_len(inventory: *const EsInventory) -> usize {
    inventory.as_ref().map_or(0, |i| i.inventory.len())
}

/// Writes whether `emoji` (canonical form) is an inventory entry.
///
/// # Safety
/// `emoji` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn es_inventory_contains(
    inventory: *const EsInventory,
    emoji: *const c_char,
    out: *mut bool,
) -> EsStatus {
    guard(|| {
        let inv = ref_arg(inventory, "inventory")?;
        let e = str_arg(emoji, "emoji")?;
        *out_arg(out, "out")? = inv.inventory.contains(e);
        Ok(())
    })
}

/// Display category of `emoji` as an owned string, or null in `out` when
/// the emoji is not in the inventory.
///
/// # Safety
/// `emoji` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn es_inventory_category(
    inventory: *const EsInventory,
    emoji: *const c_char,
    out: *mut *mut c_char,
) -> EsStatus {
    guard(|| {
        let inv = ref_arg(inventory, "inventory")?;
        let e = str_arg(emoji, "emoji")?;
        let out = out_arg(out, "out")?;
        *out = inv
            .inventory
            .category_of(e)
            .map_or(ptr::null_mut(), |c| owned_string(c.to_string()));
        Ok(())
    })
}

// ---------------------------------------------------------------- text

/// Replaces URLs, mentions, dates and similar spans with meta-tokens.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn es_normalize_text(text: *const c_char, out: *mut *mut c_char) -> EsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(text, "text")?;
        *out = owned_string(corpus::normalize_text(text));
        Ok(())
    })
}

/// Tokenizes one post; `out` receives the tokens joined by single spaces.
///
/// # Safety
/// `text` and `lang` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn es_tokenize(
    inventory: *const EsInventory,
    text: *const c_char,
    lang: *const c_char,
    pre_tokenized: bool,
    out: *mut *mut c_char,
) -> EsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let inv = ref_arg(inventory, "inventory")?;
        let record = PostRecord {
            post_id: String::new(),
            text: str_arg(text, "text")?.to_string(),
            country: String::new(),
            lang: str_arg(lang, "lang")?.to_string(),
            pre_tokenized,
        };
        *out = owned_string(corpus::tokenize(&record, &inv.inventory).tokens.join(" "));
        Ok(())
    })
}

// ---------------------------------------------------------------- numerics

/// Pearson correlation of two length-`n` series.
///
/// # Safety
/// `x` and `y` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn es_pearson(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> EsStatus {
    guard(|| {
        let (x, y) = (slice_arg(x, n, "x")?, slice_arg(y, n, "y")?);
        *out_arg(out, "out")? = analytics::pearson(x, y)?;
        Ok(())
    })
}

/// Spearman rank correlation with average ranks for ties.
///
/// # Safety
/// `x` and `y` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn es_spearman(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> EsStatus {
    guard(|| {
        let (x, y) = (slice_arg(x, n, "x")?, slice_arg(y, n, "y")?);
        *out_arg(out, "out")? = analytics::spearman(x, y)?;
        Ok(())
    })
}

/// Cosine similarity of two length-`n` vectors.
///
/// # Safety
/// `u` and `v` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn es_cosine(u: *const f64, v: *const f64, n: usize, out: *mut f64) -> EsStatus {
    guard(|| {
        let (u, v) = (slice_arg(u, n, "u")?, slice_arg(v, n, "v")?);
        *out_arg(out, "out")? = projection::cosine(u, v)?;
        Ok(())
    })
}

/// Orthonormalizes `k` row vectors of dimension `d` (row-major, `k * d`
/// doubles) in order, writing the basis to `out` in the same layout.
///
/// # Safety
/// `vectors` and `out` must each hold `k * d` doubles.
#[no_mangle]
pub unsafe extern "C" fn es_gram_schmidt(vectors: *const f64, k: usize, d: usize, out: *mut f64) -> EsStatus {
    guard(|| {
        let len = k
            .checked_mul(d)
            .ok_or_else(|| fail(EsStatus::InvalidArgument, "k * d overflows"))?;
        if d == 0 && k > 0 {
            return Err(fail(EsStatus::InvalidArgument, "dimension must be at least 1"));
        }
        let input = slice_arg(vectors, len, "vectors")?;
        let rows: Vec<Vec<f64>> = input.chunks(d.max(1)).map(<[f64]>::to_vec).collect();
        let names: Vec<String> = (0..k).map(|i| format!("row {i}")).collect();
        let basis = projection::gram_schmidt(&names, &rows)?;
        let dst = slice_out(out, len, "out")?;
        for (chunk, e) in dst.chunks_mut(d.max(1)).zip(&basis) {
            chunk.copy_from_slice(e);
        }
        Ok(())
    })
}
