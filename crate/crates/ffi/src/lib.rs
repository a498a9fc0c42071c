//! C ABI over the litgraph library.
//!
//! Objects are opaque handles created by `*_open`/`*_load` and released by
//! the matching `*_free`. Every fallible call returns an [`LgStatus`]; on
//! failure [`lg_last_error`] describes the error for the calling thread.
//! Strings returned through out-parameters are JSON and must be released
//! with [`lg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use litgraph::concepts::load_precomputed_embeddings;
use litgraph::graph::{graph_stats, top_indegree};
use litgraph::latex::{process_tree, LatexConfig};
use litgraph::retriever::{cosine, retrieve_top_k};
use litgraph::{CitationGraph, CorpusStore, EmbeddingStore, Method, Query, SourceTree};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    NotFound = 4,
    Io = 5,
    Parse = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LgMethod {
    Concept = 0,
    Baseline = 1,
}

impl From<LgMethod> for Method {
    fn from(m: LgMethod) -> Self {
        match m {
            LgMethod::Concept => Method::Concept,
            LgMethod::Baseline => Method::Baseline,
        }
    }
}

pub struct LgCorpus {
    inner: CorpusStore,
}

pub struct LgEmbeddingStore {
    inner: EmbeddingStore,
}

pub struct LgGraph {
    inner: CitationGraph,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(LgStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn fail<T>(status: LgStatus, msg: impl Into<String>) -> FfiResult<T> {
    Err(Failure(status, msg.into()))
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, records any error or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> LgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LgStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            LgStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return fail(LgStatus::NullArgument, format!("{name} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(LgStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref()
        .map_or_else(|| fail(LgStatus::NullArgument, format!("{name} is null")), Ok)
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> FfiResult<&'a mut T> {
    p.as_mut()
        .map_or_else(|| fail(LgStatus::NullArgument, format!("{name} is null")), Ok)
}

fn json_string<T: serde::Serialize>(value: &T) -> FfiResult<*mut c_char> {
    let s = serde_json::to_string(value).or_else(|e| fail(LgStatus::Parse, e.to_string()))?;
    Ok(CString::new(s).expect("JSON has no interior nul").into_raw())
}

fn io_status(e: &std::io::Error) -> LgStatus {
    if e.kind() == std::io::ErrorKind::NotFound {
        LgStatus::NotFound
    } else {
        LgStatus::Io
    }
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn lg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn lg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Cosine similarity of two `dim`-length vectors.
///
/// # Safety
/// `a` and `b` must point to `dim` floats; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_cosine(a: *const f32, b: *const f32, dim: usize, out: *mut f64) -> LgStatus {
    guard(|| {
        if a.is_null() || b.is_null() {
            return fail(LgStatus::NullArgument, "vector is null");
        }
        let out = out_arg(out, "out")?;
        let (a, b) = (std::slice::from_raw_parts(a, dim), std::slice::from_raw_parts(b, dim));
        *out = cosine(a, b).or_else(|e| fail(LgStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Opens an ingested corpus directory (`corpus.jsonl`).
///
/// # Safety
/// `dir` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_corpus_open(dir: *const c_char, out: *mut *mut LgCorpus) -> LgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let dir = str_arg(dir, "dir")?;
        let inner = CorpusStore::open(Path::new(dir)).or_else(|e| match e {
            litgraph::corpus::IngestError::Io(io) => fail(io_status(&io), io.to_string()),
            other => fail(LgStatus::Parse, other.to_string()),
        })?;
        *out = Box::into_raw(Box::new(LgCorpus { inner }));
        Ok(())
    })
}

/// Number of records; 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_corpus_count(corpus: *const LgCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.inner.count())
}

/// One record as JSON (`id`, `title`, `abstract`, `categories`, `version`).
///
/// # Safety
/// `corpus` must be a live handle, `paper_id` a nul-terminated string and
/// `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn lg_corpus_get_json(
    corpus: *const LgCorpus,
    paper_id: *const c_char,
    out_json: *mut *mut c_char,
) -> LgStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        let corpus = handle(corpus, "corpus")?;
        let id = str_arg(paper_id, "paper_id")?;
        match corpus.inner.get(id) {
            Some(record) => {
                *out = json_string(record)?;
                Ok(())
            }
            None => fail(LgStatus::NotFound, format!("no paper {id}")),
        }
    })
}

/// # Safety
/// `corpus` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lg_corpus_free(corpus: *mut LgCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Loads an `embeddings.jsonl` file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_embeddings_load(path: *const c_char, out: *mut *mut LgEmbeddingStore) -> LgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let (inner, _) = load_precomputed_embeddings(Path::new(path)).or_else(|e| match e {
            litgraph::concepts::ConceptError::Io(io) => fail(io_status(&io), io.to_string()),
            other => fail(LgStatus::Parse, other.to_string()),
        })?;
        *out = Box::into_raw(Box::new(LgEmbeddingStore { inner }));
        Ok(())
    })
}

/// Number of papers with any vector; 0 for a null handle.
///
/// # Safety
/// `store` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_embeddings_len(store: *const LgEmbeddingStore) -> usize {
    store.as_ref().map_or(0, |s| s.inner.len())
}

/// Vector dimension, or 0 when unknown.
///
/// # Safety
/// `store` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_embeddings_dim(store: *const LgEmbeddingStore) -> usize {
    store.as_ref().and_then(|s| s.inner.dim()).unwrap_or(0)
}

/// Top-`k` papers for a query vector as retrieval-result JSON.
///
/// # Safety
/// `query` must point to `dim` floats, `store` must be a live handle and
/// `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn lg_retrieve_top_k(
    store: *const LgEmbeddingStore,
    query: *const f32,
    dim: usize,
    k: usize,
    method: LgMethod,
    out_json: *mut *mut c_char,
) -> LgStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        let store = handle(store, "store")?;
        if query.is_null() {
            return fail(LgStatus::NullArgument, "query is null");
        }
        let q = Query::new("", std::slice::from_raw_parts(query, dim).to_vec());
        let result = retrieve_top_k(&q, &store.inner, k, method.into())
            .or_else(|e| fail(LgStatus::InvalidArgument, e.to_string()))?;
        *out = json_string(&result)?;
        Ok(())
    })
}

/// # Safety
/// `store` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lg_embeddings_free(store: *mut LgEmbeddingStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Loads a `graph.json` file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lg_graph_load(path: *const c_char, out: *mut *mut LgGraph) -> LgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let inner = CitationGraph::load(Path::new(path)).or_else(|e| match e {
            litgraph::graph::GraphError::Io(io) => fail(io_status(&io), io.to_string()),
            other => fail(LgStatus::Parse, other.to_string()),
        })?;
        *out = Box::into_raw(Box::new(LgGraph { inner }));
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_graph_node_count(graph: *const LgGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.inner.node_count())
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lg_graph_edge_count(graph: *const LgGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.inner.edge_count())
}

/// `[[paper_id, indegree], ...]` for the `n` most-cited nodes.
///
/// # Safety
/// `graph` must be a live handle and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn lg_graph_top_indegree_json(graph: *const LgGraph, n: usize, out_json: *mut *mut c_char) -> LgStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        let graph = handle(graph, "graph")?;
        if n == 0 {
            return fail(LgStatus::InvalidArgument, "n must be at least 1");
        }
        *out = json_string(&top_indegree(&graph.inner, n))?;
        Ok(())
    })
}

/// `{nodes, edges, token_estimate}`.
///
/// # Safety
/// `graph` must be a live handle and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn lg_graph_stats_json(graph: *const LgGraph, out_json: *mut *mut c_char) -> LgStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        let graph = handle(graph, "graph")?;
        *out = json_string(&graph_stats(&graph.inner))?;
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lg_graph_free(graph: *mut LgGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Processes one paper's LaTeX source (directory or archive) with default
/// settings and returns the processed document as JSON.
///
/// # Safety
/// `source` and `paper_id` must be nul-terminated strings and `out_json`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn lg_process_latex(
    source: *const c_char,
    paper_id: *const c_char,
    out_json: *mut *mut c_char,
) -> LgStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        let source = str_arg(source, "source")?;
        let id = str_arg(paper_id, "paper_id")?;
        let latex_err = |e: litgraph::latex::LatexError| match e {
            litgraph::latex::LatexError::Io(io) => Failure(io_status(&io), io.to_string()),
            other => Failure(LgStatus::Parse, other.to_string()),
        };
        let tree = SourceTree::load(Path::new(source)).map_err(latex_err)?;
        let doc = process_tree(&tree, id, &LatexConfig::default()).map_err(latex_err)?;
        *out = json_string(&doc)?;
        Ok(())
    })
}
