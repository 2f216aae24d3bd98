//! C ABI over the `spic` library.
//!
//! Graphs and aggregators cross the boundary as opaque handles created by
//! `spic_*_load` / `spic_*_build` style constructors and released with the
//! matching `*_free`. Every fallible function returns a [`SpicStatus`]; on
//! failure [`spic_last_error_message`] describes the error for the calling
//! thread. Dense matrices are row-major `double` buffers owned by the
//! caller. Panics never unwind into C: they are reported as
//! `SPIC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use spic::aggregators::{attention_entropy, Aggregator};
use spic::bench::{run_on_graph, ModelFamily, ModelSpec};
use spic::graphdata::{generate_sbm, load_graph, randomize_features, save_graph, FeatureMode, Graph, SbmSpec};
use spic::learn::{TrainConfig, Variant};
use spic::propagation::propagate;
use spic::SpicError;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpicStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Dimension = 5,
    Numeric = 6,
    Panic = 7,
}

/// Feature distribution of generated graphs.
pub const SPIC_FEATURES_RANDOM_UNIFORM: u32 = 0;
pub const SPIC_FEATURES_ONEHOT_BLOCK_NOISY: u32 = 1;

/// Opaque graph handle.
pub struct SpicGraph(Graph);

/// Opaque aggregator handle (operator plus shift).
pub struct SpicAggregator(Aggregator);

/// Settings for [`spic_run_experiment`]; start from
/// [`spic_run_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpicRunOptions {
    /// NUL-terminated model name: dad, da, agnn, gat_sym, gat_asym,
    /// rl_sym, rl_am, appnp or poly.
    pub model: *const c_char,
    /// NUL-terminated head variant: linear, relu1, general or w. Null
    /// selects linear (or the polynomial head for poly).
    pub variant: *const c_char,
    pub k: usize,
    pub beta: u32,
    pub alpha: f64,
    pub eps: f64,
    pub runs: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub hidden: usize,
    pub seed: u64,
}

/// Aggregate of one experiment. Metrics are fractions in [0, 1].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpicRunSummary {
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
    pub seconds_per_run: f64,
    /// 1 when the metric is micro-F1, 0 for accuracy.
    pub multilabel: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(SpicStatus, String);

impl From<SpicError> for Failure {
    fn from(e: SpicError) -> Self {
        let status = match &e {
            SpicError::Io { .. } => SpicStatus::Io,
            SpicError::Parse { .. } => SpicStatus::Parse,
            SpicError::Dimension(_) => SpicStatus::Dimension,
            SpicError::NonFinite { .. } | SpicError::Divergence { .. } | SpicError::Oracle(_) => SpicStatus::Numeric,
            _ => SpicStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(SpicStatus::InvalidArgument, msg.into())
}

fn null(what: &str) -> Failure {
    Failure(SpicStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SpicStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpicStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            SpicStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

/// # Safety
/// `p` is null or points to a live handle.
unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn out_ptr<T>(p: *mut T, what: &str) -> Result<*mut T, Failure> {
    if p.is_null() {
        Err(null(what))
    } else {
        Ok(p)
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn spic_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread ("" if none). The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn spic_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a graph directory.
///
/// # Safety
/// `dir` is a NUL-terminated path; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn spic_graph_load(dir: *const c_char, out: *mut *mut SpicGraph) -> SpicStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let dir = PathBuf::from(c_str(dir, "dir")?);
        let g = load_graph(dir)?;
        *out = Box::into_raw(Box::new(SpicGraph(g)));
        Ok(())
    })
}

/// Writes a graph directory.
///
/// # Safety
/// `graph` is a live handle; `dir` is a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn spic_graph_save(graph: *const SpicGraph, dir: *const c_char) -> SpicStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        save_graph(&g.0, c_str(dir, "dir")?)?;
        Ok(())
    })
}

/// Samples a stochastic block model with `blocks` equal blocks of `size`
/// nodes; `feature_mode` is one of the `SPIC_FEATURES_*` constants.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn spic_graph_generate_sbm(
    blocks: usize,
    size: usize,
    p_in: f64,
    p_out: f64,
    labeled_per_block: usize,
    features: usize,
    feature_mode: u32,
    seed: u64,
    out: *mut *mut SpicGraph,
) -> SpicStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let mode = match feature_mode {
            SPIC_FEATURES_RANDOM_UNIFORM => FeatureMode::RandomUniform,
            SPIC_FEATURES_ONEHOT_BLOCK_NOISY => FeatureMode::OnehotBlockNoisy,
            other => return Err(invalid(format!("unknown feature mode {other}"))),
        };
        if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
            return Err(invalid("edge probabilities must lie in [0,1]"));
        }
        let spec = SbmSpec::uniform(blocks, size, p_in, p_out, labeled_per_block, seed);
        let g = generate_sbm(&spec, features, mode)?;
        *out = Box::into_raw(Box::new(SpicGraph(g)));
        Ok(())
    })
}

/// Copy of `graph` with `d` i.i.d. Uniform[0,1) feature columns.
///
/// # Safety
/// `graph` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn spic_graph_randomize_features(
    graph: *const SpicGraph,
    d: usize,
    seed: u64,
    out: *mut *mut SpicGraph,
) -> SpicStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let g = randomize_features(&handle(graph, "graph")?.0, d, seed)?;
        *out = Box::into_raw(Box::new(SpicGraph(g)));
        Ok(())
    })
}

/// Releases a graph; null is ignored.
///
/// # Safety
/// `graph` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spic_graph_free(graph: *mut SpicGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spic_graph_num_nodes(graph: *const SpicGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.num_nodes())
}

/// # Safety
/// `graph` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spic_graph_num_features(graph: *const SpicGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.num_features())
}

/// # Safety
/// `graph` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spic_graph_num_classes(graph: *const SpicGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.num_classes())
}

/// Undirected edge count.
///
/// # Safety
/// `graph` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spic_graph_num_edges(graph: *const SpicGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.num_edges())
}

/// Copies the n × d feature matrix into `out` (row-major, `len` = n·d).
///
/// # Safety
/// `graph` is a live handle; `out` holds `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn spic_graph_features(graph: *const SpicGraph, out: *mut f64, len: usize) -> SpicStatus {
    guard(|| {
        let g = &handle(graph, "graph")?.0;
        let x = g.features();
        if len != x.len() {
            return Err(Failure(
                SpicStatus::Dimension,
                format!("buffer holds {len} values, features need {}", x.len()),
            ));
        }
        let out = std::slice::from_raw_parts_mut(out_ptr(out, "out")?, len);
        for (i, row) in x.row_iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                out[i * x.ncols() + j] = *v;
            }
        }
        Ok(())
    })
}

/// Builds the aggregator of a named model (see [`SpicRunOptions::model`];
/// appnp and poly give DAD) with shift `beta`. `eps` is the AGNN
/// temperature; `seed` drives the random families.
///
/// # Safety
/// `graph` is a live handle; `model` is NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn spic_aggregator_build(
    graph: *const SpicGraph,
    model: *const c_char,
    beta: u32,
    eps: f64,
    seed: u64,
    out: *mut *mut SpicAggregator,
) -> SpicStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let g = &handle(graph, "graph")?.0;
        let family: ModelFamily = c_str(model, "model")?.parse().map_err(invalid)?;
        let mut spec = ModelSpec::new(family, vec![1]);
        spec.beta = beta;
        spec.eps = eps;
        let agg = spec.build_aggregator(g, seed)?;
        *out = Box::into_raw(Box::new(SpicAggregator(agg)));
        Ok(())
    })
}

/// # Safety
/// `agg` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spic_aggregator_free(agg: *mut SpicAggregator) {
    if !agg.is_null() {
        drop(Box::from_raw(agg));
    }
}

/// Node count of the operator.
///
/// # Safety
/// `agg` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spic_aggregator_size(agg: *const SpicAggregator) -> usize {
    agg.as_ref().map_or(0, |a| a.0.size())
}

/// `out = (βI + M)^k x` for a row-major n × d `x`; `normalize` ≠ 0 rescales
/// columns by their max-abs value after each iteration. `x` and `out` may
/// not overlap.
///
/// # Safety
/// `agg` is a live handle; `x` and `out` each hold n·d doubles.
#[no_mangle]
pub unsafe extern "C" fn spic_propagate(
    agg: *const SpicAggregator,
    x: *const f64,
    n: usize,
    d: usize,
    k: usize,
    normalize: i32,
    out: *mut f64,
) -> SpicStatus {
    guard(|| {
        let agg = &handle(agg, "aggregator")?.0;
        if x.is_null() {
            return Err(null("x"));
        }
        let out = out_ptr(out, "out")?;
        if n != agg.size() {
            return Err(Failure(
                SpicStatus::Dimension,
                format!("x has {n} rows, aggregator has {} nodes", agg.size()),
            ));
        }
        let len = n.checked_mul(d).ok_or_else(|| invalid("n·d overflows"))?;
        let input = nalgebra::DMatrix::from_row_slice(n, d, std::slice::from_raw_parts(x, len));
        let emb = propagate(agg, &input, k, normalize != 0)?;
        let out = std::slice::from_raw_parts_mut(out, len);
        for i in 0..n {
            for j in 0..d {
                out[i * d + j] = emb.values[(i, j)];
            }
        }
        Ok(())
    })
}

/// Natural-log entropy of every row of the operator into `out` (`len` =
/// node count).
///
/// # Safety
/// `agg` is a live handle; `out` holds `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn spic_attention_entropy(agg: *const SpicAggregator, out: *mut f64, len: usize) -> SpicStatus {
    guard(|| {
        let agg = &handle(agg, "aggregator")?.0;
        let out = out_ptr(out, "out")?;
        if len != agg.size() {
            return Err(Failure(
                SpicStatus::Dimension,
                format!("buffer holds {len} values, aggregator has {} nodes", agg.size()),
            ));
        }
        let h = attention_entropy(agg)?;
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&h);
        Ok(())
    })
}

/// Defaults matching the command line: dad, linear head, k = 2, 20 runs
/// of 100 epochs.
#[no_mangle]
pub extern "C" fn spic_run_options_default() -> SpicRunOptions {
    let t = TrainConfig::default();
    SpicRunOptions {
        model: c"dad".as_ptr(),
        variant: ptr::null(),
        k: 2,
        beta: 0,
        alpha: 0.1,
        eps: 1.0,
        runs: t.runs,
        epochs: t.epochs,
        learning_rate: t.learning_rate,
        weight_decay: t.weight_decay,
        hidden: t.hidden,
        seed: t.seed,
    }
}

/// Trains `options.runs` models on `graph` and writes the aggregate.
///
/// # Safety
/// `graph` is a live handle; `options` points to initialized options with
/// valid strings; `summary` is writable.
#[no_mangle]
pub unsafe extern "C" fn spic_run_experiment(
    graph: *const SpicGraph,
    options: *const SpicRunOptions,
    summary: *mut SpicRunSummary,
) -> SpicStatus {
    guard(|| {
        let g = &handle(graph, "graph")?.0;
        let o = handle(options, "options")?;
        let summary = out_ptr(summary, "summary")?;
        let family: ModelFamily = c_str(o.model, "options.model")?.parse().map_err(invalid)?;
        let mut model = ModelSpec::new(family, vec![o.k]);
        if !o.variant.is_null() {
            let v: Variant = c_str(o.variant, "options.variant")?.parse().map_err(invalid)?;
            if family != ModelFamily::Poly {
                model.variant = v;
            }
        }
        model.beta = o.beta;
        model.alpha = o.alpha;
        model.eps = o.eps;
        let config = TrainConfig {
            runs: o.runs,
            epochs: o.epochs,
            learning_rate: o.learning_rate,
            weight_decay: o.weight_decay,
            hidden: o.hidden,
            seed: o.seed,
            ..TrainConfig::default()
        };
        let report = run_on_graph(&model, g, "ffi", &config)?;
        *summary = SpicRunSummary {
            mean: report.mean,
            std: report.std,
            runs: report.runs,
            seconds_per_run: report.seconds_per_run,
            multilabel: u32::from(g.labels().is_multilabel()),
        };
        Ok(())
    })
}
