//! C interface to `gnqa`.
//!
//! Objects cross the boundary as opaque handles created by `*_load` or
//! `*_parse` and released with the matching `*_free`. Every fallible call
//! returns a [`GnqaStatus`]; on failure the message is available from
//! [`gnqa_last_error`] on the same thread until the next failing call.
//! Strings returned through out-parameters are owned by the caller and
//! released with [`gnqa_string_free`].

#![allow(clippy::too_many_arguments)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gnqa::encoder::{load_embeddings, EmbeddingTable};
use gnqa::explain::{explain_sample, export_dot, Selection};
use gnqa::heads::{QaModel, SampleInput};
use gnqa::scene_graph::{parse_scene_graph, SceneGraph};
use gnqa::trainer::load_checkpoint;
use gnqa::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GnqaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    Shape = 6,
    Config = 7,
    Checkpoint = 8,
    Runtime = 9,
    Panic = 10,
}

impl From<&Error> for GnqaStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => GnqaStatus::Io,
            Error::Json { .. } | Error::Format { .. } => GnqaStatus::Parse,
            Error::Validation(_) => GnqaStatus::Validation,
            Error::Shape { .. } => GnqaStatus::Shape,
            Error::Config(_) => GnqaStatus::Config,
            Error::Checkpoint(_) => GnqaStatus::Checkpoint,
            Error::NonFiniteLoss { .. } | Error::Sample { .. } => GnqaStatus::Runtime,
        }
    }
}

/// A parsed, validated scene graph.
pub struct GnqaSceneGraph {
    graph: SceneGraph,
}

/// A trained model together with the word vectors it was trained with.
pub struct GnqaModel {
    model: QaModel,
    table: EmbeddingTable,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(GnqaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(GnqaStatus::from(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GnqaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GnqaStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GnqaStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(GnqaStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            GnqaStatus::InvalidUtf8,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// The message of the last failed call on this thread, or NULL. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gnqa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gnqa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn gnqa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates one scene graph in JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gnqa_scene_graph_parse(
    json: *const c_char,
    out: *mut *mut GnqaSceneGraph,
) -> GnqaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let graph = parse_scene_graph(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(GnqaSceneGraph { graph }));
        Ok(())
    })
}

/// # Safety
/// `g` must be NULL or a handle from [`gnqa_scene_graph_parse`].
#[no_mangle]
pub unsafe extern "C" fn gnqa_scene_graph_free(g: *mut GnqaSceneGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Node count, or 0 for NULL.
///
/// # Safety
/// `g` must be NULL or a live scene-graph handle.
#[no_mangle]
pub unsafe extern "C" fn gnqa_scene_graph_num_nodes(g: *const GnqaSceneGraph) -> usize {
    g.as_ref().map_or(0, |g| g.graph.nodes.len())
}

/// Edge count, or 0 for NULL.
///
/// # Safety
/// `g` must be NULL or a live scene-graph handle.
#[no_mangle]
pub unsafe extern "C" fn gnqa_scene_graph_num_edges(g: *const GnqaSceneGraph) -> usize {
    g.as_ref().map_or(0, |g| g.graph.edges.len())
}

/// Loads a checkpoint and the word-vector file it should be used with.
///
/// # Safety
/// Both paths must be NUL-terminated strings and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gnqa_model_load(
    checkpoint_path: *const c_char,
    embeddings_path: *const c_char,
    out: *mut *mut GnqaModel,
) -> GnqaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = load_checkpoint(text(checkpoint_path, "checkpoint_path")?)?;
        let table = load_embeddings(text(embeddings_path, "embeddings_path")?)?;
        if table.dim() != model.config().encoder.d_w {
            return Err(Failure(
                GnqaStatus::Checkpoint,
                format!(
                    "model expects {}-d word vectors, file has {}",
                    model.config().encoder.d_w,
                    table.dim()
                ),
            ));
        }
        *out = Box::into_raw(Box::new(GnqaModel { model, table }));
        Ok(())
    })
}

/// # Safety
/// `m` must be NULL or a handle from [`gnqa_model_load`].
#[no_mangle]
pub unsafe extern "C" fn gnqa_model_free(m: *mut GnqaModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// GN forward passes run by this model since load or the last reset.
///
/// # Safety
/// `m` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn gnqa_model_gn_evaluations(m: *const GnqaModel) -> u64 {
    m.as_ref().map_or(0, |m| m.model.gn_evaluations() as u64)
}

/// # Safety
/// `m` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn gnqa_model_reset_gn_evaluations(m: *const GnqaModel) {
    if let Some(m) = m.as_ref() {
        m.model.reset_gn_evaluations();
    }
}

/// Everything one question needs, read from C arrays.
unsafe fn sample_input(
    m: &GnqaModel,
    g: *const GnqaSceneGraph,
    question: *const c_char,
    candidates: *const *const c_char,
    n_candidates: usize,
    image: *const f64,
    image_len: usize,
) -> Result<SampleInput, Failure> {
    let g = handle(g, "graph")?;
    let question = text(question, "question")?;
    if candidates.is_null() {
        return Err(null("candidates"));
    }
    let cands = (0..n_candidates)
        .map(|i| text(*candidates.add(i), "candidate").map(str::to_string))
        .collect::<Result<Vec<_>, _>>()?;
    let image = if image.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(image, image_len))
    };
    let cfg = m.model.config();
    if cfg.encoder.use_image() && image.is_none() {
        return Err(Failure(
            GnqaStatus::Config,
            "this model needs image features".into(),
        ));
    }
    Ok(SampleInput::encode(
        &g.graph, question, &cands, image, &m.table, cfg,
    )?)
}

/// Writes one logit per candidate into `out_scores[0..n_candidates]`.
/// `image` may be NULL for models that do not use image features.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `candidates` holds
/// `n_candidates` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn gnqa_model_score(
    m: *const GnqaModel,
    graph: *const GnqaSceneGraph,
    question: *const c_char,
    candidates: *const *const c_char,
    n_candidates: usize,
    image: *const f64,
    image_len: usize,
    out_scores: *mut f64,
) -> GnqaStatus {
    guard(|| {
        let m = handle(m, "model")?;
        if out_scores.is_null() {
            return Err(null("out_scores"));
        }
        let x = sample_input(
            m,
            graph,
            question,
            candidates,
            n_candidates,
            image,
            image_len,
        )?;
        let scores = m.model.score_candidates(&x)?;
        std::slice::from_raw_parts_mut(out_scores, n_candidates).copy_from_slice(&scores);
        Ok(())
    })
}

/// Index of the highest-scoring candidate, lowest on ties.
///
/// # Safety
/// As for [`gnqa_model_score`]; `out_index` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gnqa_model_predict(
    m: *const GnqaModel,
    graph: *const GnqaSceneGraph,
    question: *const c_char,
    candidates: *const *const c_char,
    n_candidates: usize,
    image: *const f64,
    image_len: usize,
    out_index: *mut usize,
) -> GnqaStatus {
    guard(|| {
        let m = handle(m, "model")?;
        if out_index.is_null() {
            return Err(null("out_index"));
        }
        let x = sample_input(
            m,
            graph,
            question,
            candidates,
            n_candidates,
            image,
            image_len,
        )?;
        *out_index = m.model.predict(&x)?;
        Ok(())
    })
}

/// Graphviz text of the graph with the top `q` fraction of nodes and
/// edges by updated-feature norm drawn solid. Free with
/// [`gnqa_string_free`].
///
/// # Safety
/// As for [`gnqa_model_score`]; `out_dot` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gnqa_model_explain_dot(
    m: *const GnqaModel,
    graph: *const GnqaSceneGraph,
    question: *const c_char,
    candidates: *const *const c_char,
    n_candidates: usize,
    image: *const f64,
    image_len: usize,
    q: f64,
    out_dot: *mut *mut c_char,
) -> GnqaStatus {
    guard(|| {
        let m = handle(m, "model")?;
        if out_dot.is_null() {
            return Err(null("out_dot"));
        }
        let x = sample_input(
            m,
            graph,
            question,
            candidates,
            n_candidates,
            image,
            image_len,
        )?;
        let (_, report) = explain_sample(&m.model, &x, None, Selection::Fraction(q))?;
        let g = &handle(graph, "graph")?.graph;
        let shown = if m.model.config().no_graph {
            SceneGraph::default()
        } else if m.model.config().no_edges {
            g.without_edges()
        } else {
            g.clone()
        };
        let dot = export_dot(&shown, &report)?;
        *out_dot = CString::new(dot).expect("DOT has no NULs").into_raw();
        Ok(())
    })
}
