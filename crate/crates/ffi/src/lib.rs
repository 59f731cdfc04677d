//! C ABI over the charnmt toolkit.
//!
//! Every fallible function returns a [`CnmtStatus`]; on failure the message
//! is available from [`cnmt_last_error`] on the same thread. Strings handed
//! out by the library must be released with [`cnmt_string_free`] and model
//! handles with [`cnmt_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use charnmt::checkpoint::load_checkpoint;
use charnmt::metrics::{char_ter, corpus_bleu, evaluate, ter};
use charnmt::model::Seq2SeqModel;
use charnmt::Error;

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnmtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Data = 4,
    Checkpoint = 5,
    Io = 6,
    Numeric = 7,
    Contract = 8,
    Panic = 9,
}

/// Opaque model handle.
pub struct CnmtModel {
    inner: Seq2SeqModel,
}

/// Corpus-level scores as printed by `charnmt eval`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CnmtEvalReport {
    pub bleu: f64,
    pub bleu_cased: f64,
    pub ter: f64,
    pub char_ter: f64,
    pub segments: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CnmtStatus {
    match e {
        Error::Config(_) => CnmtStatus::Config,
        Error::Data(_) | Error::Parse { .. } => CnmtStatus::Data,
        Error::Checkpoint(_) => CnmtStatus::Checkpoint,
        Error::Io { .. } => CnmtStatus::Io,
        Error::Numeric(_) => CnmtStatus::Numeric,
        Error::Contract(_) | Error::Shape { .. } => CnmtStatus::Contract,
    }
}

struct Fail(CnmtStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CnmtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CnmtStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CnmtStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(CnmtStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CnmtStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(CnmtStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn str_array<'a>(p: *const *const c_char, n: usize, name: &str) -> Result<Vec<&'a str>, Fail> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(Fail(CnmtStatus::NullPointer, format!("{name} is null")));
    }
    std::slice::from_raw_parts(p, n)
        .iter()
        .enumerate()
        .map(|(i, &s)| str_arg(s, &format!("{name}[{i}]")))
        .collect()
}

/// Message for the most recent failure on this thread; empty after a
/// success. Valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn cnmt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cnmt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint file. On success `*out` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cnmt_model_load(path: *const c_char, out: *mut *mut CnmtModel) -> CnmtStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let model = load_checkpoint(path)?;
        *out = Box::into_raw(Box::new(CnmtModel { inner: model }));
        Ok(())
    })
}

/// Releases a handle from [`cnmt_model_load`]. Null is ignored.
///
/// # Safety
/// `model` must come from [`cnmt_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cnmt_model_free(model: *mut CnmtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cnmt_model_hidden_size(model: *const CnmtModel, out: *mut usize) -> CnmtStatus {
    guard(|| {
        out_arg(out, "out")?;
        let m = model
            .as_ref()
            .ok_or_else(|| Fail(CnmtStatus::NullPointer, "model is null".into()))?;
        *out = m.inner.hidden();
        Ok(())
    })
}

/// Greedy-decodes one line. On success `*out` is a new string to be
/// released with [`cnmt_string_free`].
///
/// # Safety
/// `model` must be a live handle, `text` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cnmt_translate(
    model: *const CnmtModel,
    text: *const c_char,
    max_len: usize,
    out: *mut *mut c_char,
) -> CnmtStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = ptr::null_mut();
        let m = model
            .as_ref()
            .ok_or_else(|| Fail(CnmtStatus::NullPointer, "model is null".into()))?;
        let text = str_arg(text, "text")?;
        let result = m.inner.translate(text, max_len)?;
        let c = CString::new(result)
            .map_err(|_| Fail(CnmtStatus::Data, "translation contains a NUL character".into()))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cnmt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

/// Corpus BLEU over `n` whitespace-tokenized segment pairs.
///
/// # Safety
/// `hyps` and `refs` must each point to `n` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn cnmt_bleu(
    hyps: *const *const c_char,
    refs: *const *const c_char,
    n: usize,
    cased: bool,
    out: *mut f64,
) -> CnmtStatus {
    guard(|| {
        out_arg(out, "out")?;
        let h: Vec<Vec<&str>> = str_array(hyps, n, "hyps")?.into_iter().map(words).collect();
        let r: Vec<Vec<&str>> = str_array(refs, n, "refs")?.into_iter().map(words).collect();
        *out = corpus_bleu(&h, &r, cased)?;
        Ok(())
    })
}

/// Word-level TER of one segment pair (whitespace tokens).
///
/// # Safety
/// Both strings must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cnmt_ter(hyp: *const c_char, reference: *const c_char, out: *mut f64) -> CnmtStatus {
    guard(|| {
        out_arg(out, "out")?;
        let h = words(str_arg(hyp, "hyp")?);
        let r = words(str_arg(reference, "reference")?);
        *out = ter(&h, &r)?;
        Ok(())
    })
}

/// Character-level TER of one segment pair.
///
/// # Safety
/// Both strings must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cnmt_char_ter(hyp: *const c_char, reference: *const c_char, out: *mut f64) -> CnmtStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = char_ter(str_arg(hyp, "hyp")?, str_arg(reference, "reference")?)?;
        Ok(())
    })
}

/// All corpus metrics for `n` aligned segments.
///
/// # Safety
/// `hyps` and `refs` must each point to `n` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn cnmt_evaluate(
    hyps: *const *const c_char,
    refs: *const *const c_char,
    n: usize,
    out: *mut CnmtEvalReport,
) -> CnmtStatus {
    guard(|| {
        out_arg(out, "out")?;
        let h = str_array(hyps, n, "hyps")?;
        let r = str_array(refs, n, "refs")?;
        let rep = evaluate(&h, &r)?;
        *out = CnmtEvalReport {
            bleu: rep.bleu,
            bleu_cased: rep.bleu_cased,
            ter: rep.ter,
            char_ter: rep.char_ter,
            segments: rep.segment_count,
        };
        Ok(())
    })
}
