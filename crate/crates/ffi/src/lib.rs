//! C ABI over the `longsynth` pipeline.
//!
//! Every fallible function returns an [`LsStatus`] and writes results through
//! out-pointers. After a failure, [`ls_last_error`] returns a message for the
//! calling thread. Handles are opaque and released with their `_free`
//! function; strings allocated by the library are released with
//! [`ls_string_free`]. Panics never cross the boundary.

use libc::c_char;
use longsynth::corpus::read_all;
use longsynth::embedding::{Embedder, EmbedderConfig, EmbeddingVector};
use longsynth::synthesis::{
    compute_negative_budget, extend_document, synthesize_corpus, ExtendOutcome, JsonlDatasetSink, PositionStrategy,
    RejectReason, SelectionStrategy, SynthesisConfig,
};
use longsynth::vindex::Index;
use longsynth::{compute_corpus_stats, Document, Error, TokenizerKind};
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Io = 4,
    Record = 5,
    IndexFormat = 6,
    Embedding = 7,
    Dimension = 8,
    EmptyPool = 9,
    Integrity = 10,
    NotFound = 11,
    Interrupted = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsSelection {
    SelfRepeat = 0,
    TopK = 1,
    RandomR = 2,
    TailK = 3,
    RandomD = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsPosition {
    Head = 0,
    Tail = 1,
    Random = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsRejectReason {
    None = 0,
    BelowTarget = 1,
    PoolExhausted = 2,
    EmptyDocument = 3,
    Failed = 4,
}

/// Synthesis settings. Granularity is always taken from the index.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LsSynthesisConfig {
    pub target_tokens: usize,
    /// Characters per token.
    pub encoding_rate: f64,
    pub adjustment: f64,
    pub selection: LsSelection,
    pub position: LsPosition,
    pub candidate_pool: usize,
    pub seed: u64,
    pub truncate_to_target: bool,
    /// 0 uses every core.
    pub workers: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LsBudget {
    pub total_chars: u64,
    pub meta_chars: u64,
    pub remaining_chars: i64,
    pub chars_per_meta_chunk: f64,
    pub k: usize,
    pub skip: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LsHit {
    pub chunk_id: u64,
    pub score: f32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LsReport {
    pub attempted: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// NaN when nothing was accepted.
    pub min_extension_ratio: f64,
    /// NaN when no negatives were placed.
    pub similarity_mean: f64,
}

/// A loaded chunk index together with the embedder that produced it.
pub struct LsIndex {
    index: Index,
    embedder: Embedder,
}

enum Failure {
    Null(&'static str),
    Utf8(&'static str),
    Small(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', "\\0")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> LsStatus {
    match e {
        Error::Io { .. } | Error::Stream(_) => LsStatus::Io,
        Error::Config(_) => LsStatus::Config,
        Error::Record { .. } | Error::Json(_) => LsStatus::Record,
        Error::Dimension { .. } => LsStatus::Dimension,
        Error::Remote { .. } | Error::ChunkEmbedding { .. } => LsStatus::Embedding,
        Error::IndexFormat { .. } => LsStatus::IndexFormat,
        Error::EmptyPool { .. } => LsStatus::EmptyPool,
        Error::Integrity { .. } => LsStatus::Integrity,
        Error::NotFound(_) => LsStatus::NotFound,
        Error::Interrupted => LsStatus::Interrupted,
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> LsStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => return LsStatus::Ok,
        Ok(Err(Failure::Null(what))) => (LsStatus::NullArgument, format!("{what} is NULL")),
        Ok(Err(Failure::Utf8(what))) => (LsStatus::InvalidUtf8, format!("{what} is not valid UTF-8")),
        Ok(Err(Failure::Small(msg))) => (LsStatus::BufferTooSmall, msg),
        Ok(Err(Failure::Core(e))) => (status_of(&e), e.to_string()),
        Err(_) => (LsStatus::Panic, "internal panic".to_string()),
    };
    set_last_error(msg);
    status
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Utf8(what))
}

unsafe fn opt_text<'a>(p: *const c_char, what: &'static str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(Some)
    }
}

unsafe fn handle<'a>(p: *const LsIndex) -> Result<&'a LsIndex, Failure> {
    p.as_ref().ok_or(Failure::Null("index"))
}

fn out_ptr<T>(p: *mut T, what: &'static str) -> Result<*mut T, Failure> {
    if p.is_null() {
        Err(Failure::Null(what))
    } else {
        Ok(p)
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

fn selection(s: LsSelection) -> SelectionStrategy {
    match s {
        LsSelection::SelfRepeat => SelectionStrategy::SelfRepeat,
        LsSelection::TopK => SelectionStrategy::TopK,
        LsSelection::RandomR => SelectionStrategy::RandomR,
        LsSelection::TailK => SelectionStrategy::TailK,
        LsSelection::RandomD => SelectionStrategy::RandomD,
    }
}

fn position(p: LsPosition) -> PositionStrategy {
    match p {
        LsPosition::Head => PositionStrategy::Head,
        LsPosition::Tail => PositionStrategy::Tail,
        LsPosition::Random => PositionStrategy::Random,
    }
}

fn reject_reason(r: RejectReason) -> LsRejectReason {
    match r {
        RejectReason::BelowTarget => LsRejectReason::BelowTarget,
        RejectReason::PoolExhausted => LsRejectReason::PoolExhausted,
        RejectReason::EmptyDocument => LsRejectReason::EmptyDocument,
        RejectReason::Failed => LsRejectReason::Failed,
    }
}

fn synthesis_config(c: &LsSynthesisConfig, granularity: usize) -> SynthesisConfig {
    SynthesisConfig {
        target_tokens: c.target_tokens,
        encoding_rate: c.encoding_rate,
        adjustment: c.adjustment,
        granularity,
        selection: selection(c.selection),
        position: position(c.position),
        candidate_pool: c.candidate_pool,
        seed: c.seed,
        truncate_to_target: c.truncate_to_target,
        workers: c.workers,
        ..SynthesisConfig::default()
    }
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ls_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ls_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Defaults: 8192 tokens, 4.0 chars/token, w = 1.5, TopK, Head, pool 512.
#[no_mangle]
pub extern "C" fn ls_synthesis_config_default() -> LsSynthesisConfig {
    let d = SynthesisConfig::default();
    LsSynthesisConfig {
        target_tokens: d.target_tokens,
        encoding_rate: d.encoding_rate,
        adjustment: d.adjustment,
        selection: LsSelection::TopK,
        position: LsPosition::Head,
        candidate_pool: d.candidate_pool,
        seed: d.seed,
        truncate_to_target: d.truncate_to_target,
        workers: d.workers,
    }
}

/// Negative budget for a meta-document of `meta_chars` characters split into
/// `meta_chunks` chunks at `granularity`.
///
/// # Safety
/// `config` must point to a valid config; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_negative_budget(
    meta_chars: u64,
    meta_chunks: usize,
    granularity: usize,
    config: *const LsSynthesisConfig,
    out: *mut LsBudget,
) -> LsStatus {
    guard(|| {
        let c = config.as_ref().ok_or(Failure::Null("config"))?;
        let out = out_ptr(out, "out")?;
        if meta_chunks == 0 {
            return Err(Error::Config("meta_chunks must be at least 1".into()).into());
        }
        let cfg = synthesis_config(c, granularity);
        cfg.validate()?;
        let b = compute_negative_budget(meta_chars, meta_chunks, &cfg);
        *out = LsBudget {
            total_chars: b.total_chars,
            meta_chars: b.meta_chars,
            remaining_chars: b.remaining_chars,
            chars_per_meta_chunk: b.chars_per_meta_chunk,
            k: b.k,
            skip: b.skip,
        };
        Ok(())
    })
}

/// Characters per token of a JSONL corpus under the whitespace tokenizer.
///
/// # Safety
/// `corpus_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_measure_encoding_rate(corpus_path: *const c_char, out: *mut f64) -> LsStatus {
    guard(|| {
        let path = text(corpus_path, "corpus_path")?;
        let out = out_ptr(out, "out")?;
        let docs = read_all(path)?;
        let stats = compute_corpus_stats(&docs, TokenizerKind::Whitespace.counter());
        *out = stats
            .measured_encoding_rate
            .ok_or_else(|| Error::Config("corpus has no tokens".into()))?;
        Ok(())
    })
}

/// Chunks a JSONL corpus at `granularity` and indexes it with the local
/// embedder of dimension `dimension`.
///
/// # Safety
/// `corpus_path` must be a NUL-terminated string; `out` must be writable.
/// On success `*out` owns a handle to release with [`ls_index_free`].
#[no_mangle]
pub unsafe extern "C" fn ls_index_build(
    corpus_path: *const c_char,
    granularity: usize,
    dimension: usize,
    out: *mut *mut LsIndex,
) -> LsStatus {
    guard(|| {
        let path = text(corpus_path, "corpus_path")?;
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let cfg = EmbedderConfig::local(dimension);
        let docs = read_all(path)?;
        let index = Index::build_from_documents(&docs, granularity, &cfg)?;
        let embedder = Embedder::new(&cfg)?;
        *out = Box::into_raw(Box::new(LsIndex { index, embedder }));
        Ok(())
    })
}

/// Loads an index snapshot. `endpoint` is required only for indexes built
/// with the remote embedder and may be NULL otherwise.
///
/// # Safety
/// `path` must be a NUL-terminated string, `endpoint` NULL or one; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_index_load(
    path: *const c_char,
    endpoint: *const c_char,
    out: *mut *mut LsIndex,
) -> LsStatus {
    guard(|| {
        let path = text(path, "path")?;
        let endpoint = opt_text(endpoint, "endpoint")?;
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let index = Index::load(path)?;
        let cfg = EmbedderConfig {
            provider: index.provider(),
            dimension: index.dimension(),
            endpoint: match index.provider() {
                longsynth::Provider::RemoteService => endpoint.map(str::to_string),
                longsynth::Provider::LocalHashed => None,
            },
            ..EmbedderConfig::default()
        };
        let embedder = Embedder::new(&cfg)?;
        *out = Box::into_raw(Box::new(LsIndex { index, embedder }));
        Ok(())
    })
}

/// # Safety
/// `index` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ls_index_save(index: *const LsIndex, path: *const c_char) -> LsStatus {
    guard(|| {
        let h = handle(index)?;
        h.index.save(text(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `index` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ls_index_free(index: *mut LsIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Number of chunks; 0 for NULL.
///
/// # Safety
/// `index` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ls_index_len(index: *const LsIndex) -> usize {
    index.as_ref().map_or(0, |h| h.index.len())
}

/// # Safety
/// `index` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ls_index_dimension(index: *const LsIndex) -> usize {
    index.as_ref().map_or(0, |h| h.index.dimension())
}

/// # Safety
/// `index` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ls_index_granularity(index: *const LsIndex) -> usize {
    index.as_ref().map_or(0, |h| h.index.granularity())
}

/// Top-`k` chunks for `query_text`, best first, skipping chunks of
/// `exclude_doc_id` when it is not NULL. Writes up to `k` hits into `hits`
/// (capacity `capacity`, which must be at least `k`) and the count to
/// `out_len`.
///
/// # Safety
/// `index` must be a live handle; strings NUL-terminated; `hits` must have
/// room for `capacity` entries; `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn ls_index_query(
    index: *const LsIndex,
    query_text: *const c_char,
    k: usize,
    exclude_doc_id: *const c_char,
    hits: *mut LsHit,
    capacity: usize,
    out_len: *mut usize,
) -> LsStatus {
    guard(|| {
        let h = handle(index)?;
        let query = text(query_text, "query_text")?;
        let exclude = opt_text(exclude_doc_id, "exclude_doc_id")?;
        let hits = out_ptr(hits, "hits")?;
        let out_len = out_ptr(out_len, "out_len")?;
        if capacity < k {
            return Err(Failure::Small(format!("capacity {capacity} is below k = {k}")));
        }
        let q: EmbeddingVector = h.embedder.embed_text(query)?;
        let top = h
            .index
            .query_top_k(&q, k, |r| exclude.is_some_and(|d| &*r.parent_doc_id == d))?;
        for (i, c) in top.candidates.iter().enumerate() {
            *hits.add(i) = LsHit {
                chunk_id: c.chunk_id,
                score: c.score,
            };
        }
        *out_len = top.candidates.len();
        Ok(())
    })
}

/// Text and origin of one chunk. `out_text` receives a string to release
/// with [`ls_string_free`]; `out_doc_id` likewise when not NULL;
/// `out_ordinal` (1-based) when not NULL.
///
/// # Safety
/// `index` must be a live handle; `out_text` writable; the optional
/// pointers NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ls_index_chunk(
    index: *const LsIndex,
    chunk_id: u64,
    out_text: *mut *mut c_char,
    out_doc_id: *mut *mut c_char,
    out_ordinal: *mut usize,
) -> LsStatus {
    guard(|| {
        let h = handle(index)?;
        let out_text = out_ptr(out_text, "out_text")?;
        let r = h
            .index
            .record(chunk_id)
            .ok_or_else(|| Error::NotFound(format!("chunk {chunk_id}")))?;
        *out_text = into_c_string(r.text.clone());
        if !out_doc_id.is_null() {
            *out_doc_id = into_c_string(r.parent_doc_id.to_string());
        }
        if !out_ordinal.is_null() {
            *out_ordinal = r.ordinal;
        }
        Ok(())
    })
}

/// Extends one document. On acceptance `*out_json` receives the dataset
/// record as a JSON string (release with [`ls_string_free`]) and
/// `*out_reason` is `None`; otherwise `*out_json` is NULL and `*out_reason`
/// says why.
///
/// # Safety
/// `index` and `config` must be valid; strings NUL-terminated; out-pointers
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ls_extend_document(
    index: *const LsIndex,
    config: *const LsSynthesisConfig,
    doc_id: *const c_char,
    doc_text: *const c_char,
    out_json: *mut *mut c_char,
    out_reason: *mut LsRejectReason,
) -> LsStatus {
    guard(|| {
        let h = handle(index)?;
        let c = config.as_ref().ok_or(Failure::Null("config"))?;
        let id = text(doc_id, "doc_id")?;
        let body = text(doc_text, "doc_text")?;
        let out_json = out_ptr(out_json, "out_json")?;
        let out_reason = out_ptr(out_reason, "out_reason")?;
        *out_json = ptr::null_mut();
        let doc = Document::new(id, body).map_err(Error::Config)?;
        let cfg = synthesis_config(c, h.index.granularity());
        match extend_document(&doc, &h.index, &h.embedder, &cfg)? {
            ExtendOutcome::Accepted(rec) => {
                *out_json = into_c_string(rec.to_json_line()?);
                *out_reason = LsRejectReason::None;
            }
            ExtendOutcome::Rejected { reason, .. } => *out_reason = reject_reason(reason),
        }
        Ok(())
    })
}

/// Extends every document of a JSONL corpus, writing accepted records to
/// `dataset_path` and rejects to `rejects_path`.
///
/// # Safety
/// `index` and `config` must be valid; paths NUL-terminated; `out_report`
/// NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ls_synthesize_file(
    index: *const LsIndex,
    config: *const LsSynthesisConfig,
    corpus_path: *const c_char,
    dataset_path: *const c_char,
    rejects_path: *const c_char,
    out_report: *mut LsReport,
) -> LsStatus {
    guard(|| {
        let h = handle(index)?;
        let c = config.as_ref().ok_or(Failure::Null("config"))?;
        let corpus = text(corpus_path, "corpus_path")?;
        let dataset = text(dataset_path, "dataset_path")?;
        let rejects = text(rejects_path, "rejects_path")?;
        let create = |p: &str| -> Result<BufWriter<File>, Failure> {
            Ok(BufWriter::new(File::create(p).map_err(|e| Error::Io {
                path: p.into(),
                source: e,
            })?))
        };
        let mut sink = JsonlDatasetSink::new(create(dataset)?, create(rejects)?);
        let cfg = synthesis_config(c, h.index.granularity());
        let docs = longsynth::corpus::open_corpus(corpus, Vec::new())?;
        let report = synthesize_corpus(docs, &h.index, &h.embedder, &cfg, &mut sink, None)?;
        sink.flush()?;
        if let Some(out) = out_report.as_mut() {
            *out = LsReport {
                attempted: report.attempted,
                accepted: report.accepted,
                rejected: report.rejected_total(),
                min_extension_ratio: report.min_extension_ratio.unwrap_or(f64::NAN),
                similarity_mean: if report.similarity.count > 0 {
                    report.similarity.mean
                } else {
                    f64::NAN
                },
            };
        }
        Ok(())
    })
}
