//! C ABI over the root-cause analysis toolkit.
//!
//! Heavy objects (graphs, datasets, score vectors) travel as opaque handles
//! created and destroyed by paired functions; analysis results come back as
//! JSON strings the caller frees with [`rca_string_free`]. Every fallible
//! call returns an [`RcaStatus`]; on failure a description is available from
//! [`rca_last_error_message`] until the next failing call on that thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rca_core::rca::ParentScoreMode;
use rca_core::scoring::{estimate_scores, Dataset, FeatureKind, ScoreVector};
use rca_core::{CausalDag, perturb_graph};

/// Result code of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcaStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An argument was out of range.
    InvalidArgument = 3,
    /// Graph construction or perturbation failed.
    GraphError = 4,
    /// Dataset construction or score estimation failed.
    ScoringError = 5,
    /// An analysis method failed.
    AnalysisError = 6,
    /// An internal panic was caught at the boundary.
    Panic = 7,
}

/// Feature map selector for score estimation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcaFeature {
    Identity = 0,
    ZScore = 1,
    AbsZScore = 2,
}

impl From<RcaFeature> for FeatureKind {
    fn from(f: RcaFeature) -> FeatureKind {
        match f {
            RcaFeature::Identity => FeatureKind::Identity,
            RcaFeature::ZScore => FeatureKind::ZScore,
            RcaFeature::AbsZScore => FeatureKind::AbsZScore,
        }
    }
}

/// Opaque causal graph handle.
pub struct RcaGraph {
    inner: CausalDag,
}

/// Opaque dataset handle.
pub struct RcaDataset {
    inner: Dataset,
}

/// Opaque score vector handle.
pub struct RcaScores {
    inner: ScoreVector,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let cstring = CString::new(message)
        .unwrap_or_else(|_| CString::new("error message contained a NUL byte").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn fail(status: RcaStatus, message: impl Into<String>) -> RcaStatus {
    set_error(message.into());
    status
}

/// Message for the most recent failure on this thread, or null when no
/// failure has been recorded. The pointer stays valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn rca_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |msg| msg.as_ptr())
    })
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be a pointer previously returned by one of the `*_to_json` or
/// analysis functions, not yet freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn rca_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, RcaStatus> {
    if ptr.is_null() {
        return Err(fail(RcaStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(RcaStatus::InvalidUtf8, "string argument is not UTF-8"))
}

fn write_out<T>(out: *mut *mut T, value: T) -> RcaStatus {
    if out.is_null() {
        return fail(RcaStatus::NullPointer, "null output pointer");
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    RcaStatus::Ok
}

fn json_out(out: *mut *mut c_char, json: String) -> RcaStatus {
    if out.is_null() {
        return fail(RcaStatus::NullPointer, "null output pointer");
    }
    match CString::new(json) {
        Ok(cstring) => {
            unsafe { *out = cstring.into_raw() };
            RcaStatus::Ok
        }
        Err(_) => fail(RcaStatus::Panic, "JSON contained a NUL byte"),
    }
}

fn guarded(body: impl FnOnce() -> RcaStatus) -> RcaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic at the FFI boundary".to_string());
            fail(RcaStatus::Panic, msg)
        }
    }
}

/// Parses a graph from `{"nodes": [...], "edges": [["parent","child"],...]}`.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be a valid
/// pointer. On success the caller owns the handle and must free it with
/// [`rca_graph_free`].
#[no_mangle]
pub unsafe extern "C" fn rca_graph_from_json(
    json: *const c_char,
    out: *mut *mut RcaGraph,
) -> RcaStatus {
    guarded(|| {
        let text = match read_str(json) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match CausalDag::from_json(text) {
            Ok(dag) => write_out(out, RcaGraph { inner: dag }),
            Err(e) => fail(RcaStatus::GraphError, e.to_string()),
        }
    })
}

/// Serializes a graph back to JSON; free the string with [`rca_string_free`].
///
/// # Safety
/// `graph` must be a live handle from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rca_graph_to_json(
    graph: *const RcaGraph,
    out: *mut *mut c_char,
) -> RcaStatus {
    guarded(|| {
        let Some(graph) = graph.as_ref() else {
            return fail(RcaStatus::NullPointer, "null graph handle");
        };
        json_out(out, graph.inner.to_json())
    })
}

/// # Safety
/// `graph` must be a handle from this library, not yet freed. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn rca_graph_free(graph: *mut RcaGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rca_graph_node_count(
    graph: *const RcaGraph,
    out: *mut usize,
) -> RcaStatus {
    guarded(|| {
        let (Some(graph), Some(out)) = (graph.as_ref(), out.as_mut()) else {
            return fail(RcaStatus::NullPointer, "null argument");
        };
        *out = graph.inner.node_count();
        RcaStatus::Ok
    })
}

/// True when the graph's undirected skeleton is a forest.
///
/// # Safety
/// `graph` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rca_graph_is_polytree(
    graph: *const RcaGraph,
    out: *mut bool,
) -> RcaStatus {
    guarded(|| {
        let (Some(graph), Some(out)) = (graph.as_ref(), out.as_mut()) else {
            return fail(RcaStatus::NullPointer, "null argument");
        };
        *out = graph.inner.is_polytree();
        RcaStatus::Ok
    })
}

/// # Safety
/// `graph` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rca_graph_max_in_degree(
    graph: *const RcaGraph,
    out: *mut usize,
) -> RcaStatus {
    guarded(|| {
        let (Some(graph), Some(out)) = (graph.as_ref(), out.as_mut()) else {
            return fail(RcaStatus::NullPointer, "null argument");
        };
        *out = graph.inner.max_in_degree();
        RcaStatus::Ok
    })
}

/// Randomly edits the graph to exactly `target_shd` structural Hamming
/// distance, preserving edge density.
///
/// # Safety
/// `graph` must be a live handle; `out` must be valid. The caller owns the
/// returned handle.
#[no_mangle]
pub unsafe extern "C" fn rca_graph_perturb(
    graph: *const RcaGraph,
    target_shd: usize,
    seed: u64,
    out: *mut *mut RcaGraph,
) -> RcaStatus {
    guarded(|| {
        let Some(graph) = graph.as_ref() else {
            return fail(RcaStatus::NullPointer, "null graph handle");
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match perturb_graph(&graph.inner, target_shd, &mut rng) {
            Ok(dag) => write_out(out, RcaGraph { inner: dag }),
            Err(e) => fail(RcaStatus::GraphError, e.to_string()),
        }
    })
}

/// Builds a dataset from a row-major normal matrix and one anomalous row.
///
/// # Safety
/// `names` must point to `n_vars` NUL-terminated strings; `normal` must hold
/// `n_rows * n_vars` doubles; `anomalous` must hold `n_vars` doubles; `out`
/// must be valid. The caller owns the returned handle.
#[no_mangle]
pub unsafe extern "C" fn rca_dataset_new(
    names: *const *const c_char,
    n_vars: usize,
    normal: *const f64,
    n_rows: usize,
    anomalous: *const f64,
    out: *mut *mut RcaDataset,
) -> RcaStatus {
    guarded(|| {
        if names.is_null() || normal.is_null() || anomalous.is_null() {
            return fail(RcaStatus::NullPointer, "null array argument");
        }
        let mut owned_names = Vec::with_capacity(n_vars);
        for i in 0..n_vars {
            let ptr = *names.add(i);
            match read_str(ptr) {
                Ok(s) => owned_names.push(s.to_string()),
                Err(status) => return status,
            }
        }
        let flat = std::slice::from_raw_parts(normal, n_rows * n_vars);
        let rows: Vec<Vec<f64>> = flat.chunks(n_vars).map(<[f64]>::to_vec).collect();
        let anomalous_row = std::slice::from_raw_parts(anomalous, n_vars).to_vec();
        match Dataset::new(owned_names, rows, anomalous_row) {
            Ok(dataset) => write_out(out, RcaDataset { inner: dataset }),
            Err(e) => fail(RcaStatus::ScoringError, e.to_string()),
        }
    })
}

/// Reads a dataset from a CSV with a header row; `anomalous_row` selects the
/// 0-based anomalous data row, or -1 for the last row.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rca_dataset_from_csv(
    path: *const c_char,
    anomalous_row: i64,
    out: *mut *mut RcaDataset,
) -> RcaStatus {
    guarded(|| {
        let path = match read_str(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let row = if anomalous_row < 0 {
            None
        } else {
            Some(anomalous_row as usize)
        };
        match Dataset::from_csv_path(path, row) {
            Ok(dataset) => write_out(out, RcaDataset { inner: dataset }),
            Err(e) => fail(RcaStatus::ScoringError, e.to_string()),
        }
    })
}

/// # Safety
/// `dataset` must be a handle from this library, not yet freed. Null is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn rca_dataset_free(dataset: *mut RcaDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Estimates per-variable anomaly scores for the dataset's anomalous row.
///
/// # Safety
/// `dataset` must be a live handle; `out` must be valid. The caller owns the
/// returned handle.
#[no_mangle]
pub unsafe extern "C" fn rca_estimate_scores(
    dataset: *const RcaDataset,
    feature: RcaFeature,
    out: *mut *mut RcaScores,
) -> RcaStatus {
    guarded(|| {
        let Some(dataset) = dataset.as_ref() else {
            return fail(RcaStatus::NullPointer, "null dataset handle");
        };
        match estimate_scores(&dataset.inner, feature.into()) {
            Ok(scores) => write_out(out, RcaScores { inner: scores }),
            Err(e) => fail(RcaStatus::ScoringError, e.to_string()),
        }
    })
}

/// Wraps precomputed scores; `sample_count` is the k used when estimating
/// them, which caps valid scores at ln k.
///
/// # Safety
/// `names` must point to `n` NUL-terminated strings and `values` to `n`
/// doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rca_scores_new(
    names: *const *const c_char,
    values: *const f64,
    n: usize,
    sample_count: usize,
    out: *mut *mut RcaScores,
) -> RcaStatus {
    guarded(|| {
        if names.is_null() || values.is_null() {
            return fail(RcaStatus::NullPointer, "null array argument");
        }
        let mut owned_names = Vec::with_capacity(n);
        for i in 0..n {
            match read_str(*names.add(i)) {
                Ok(s) => owned_names.push(s.to_string()),
                Err(status) => return status,
            }
        }
        let values = std::slice::from_raw_parts(values, n).to_vec();
        match ScoreVector::new(owned_names, values, sample_count) {
            Ok(scores) => write_out(out, RcaScores { inner: scores }),
            Err(e) => fail(RcaStatus::ScoringError, e.to_string()),
        }
    })
}

/// # Safety
/// `scores` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rca_scores_len(scores: *const RcaScores, out: *mut usize) -> RcaStatus {
    guarded(|| {
        let (Some(scores), Some(out)) = (scores.as_ref(), out.as_mut()) else {
            return fail(RcaStatus::NullPointer, "null argument");
        };
        *out = scores.inner.len();
        RcaStatus::Ok
    })
}

/// Looks up one variable's score by name.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn rca_scores_value(
    scores: *const RcaScores,
    name: *const c_char,
    out: *mut f64,
) -> RcaStatus {
    guarded(|| {
        let (Some(scores), Some(out)) = (scores.as_ref(), out.as_mut()) else {
            return fail(RcaStatus::NullPointer, "null argument");
        };
        let name = match read_str(name) {
            Ok(n) => n,
            Err(status) => return status,
        };
        match scores.inner.value_of(name) {
            Some(value) => {
                *out = value;
                RcaStatus::Ok
            }
            None => fail(
                RcaStatus::InvalidArgument,
                format!("unknown variable `{name}`"),
            ),
        }
    })
}

/// Serializes scores as `{"scores": {...}, "k": n}`; free with
/// [`rca_string_free`].
///
/// # Safety
/// `scores` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rca_scores_to_json(
    scores: *const RcaScores,
    out: *mut *mut c_char,
) -> RcaStatus {
    guarded(|| {
        let Some(scores) = scores.as_ref() else {
            return fail(RcaStatus::NullPointer, "null scores handle");
        };
        json_out(out, scores.inner.to_json())
    })
}

/// # Safety
/// `scores` must be a handle from this library, not yet freed. Null is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn rca_scores_free(scores: *mut RcaScores) {
    if !scores.is_null() {
        drop(Box::from_raw(scores));
    }
}

/// Runs the score-jump traversal; `target` anchors the scan to the target's
/// ancestors, or pass null to scan the whole graph. Returns the result as
/// `{"method","chosen","ranking","p_value_bound"}` JSON.
///
/// # Safety
/// Handles must be live; `target` may be null; `out_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rca_smooth_traversal(
    scores: *const RcaScores,
    graph: *const RcaGraph,
    target: *const c_char,
    out_json: *mut *mut c_char,
) -> RcaStatus {
    guarded(|| {
        let (Some(scores), Some(graph)) = (scores.as_ref(), graph.as_ref()) else {
            return fail(RcaStatus::NullPointer, "null handle");
        };
        let target_name = if target.is_null() {
            None
        } else {
            match read_str(target) {
                Ok(t) => Some(t),
                Err(status) => return status,
            }
        };
        match rca_core::smooth_traversal_with(
            &scores.inner,
            &graph.inner,
            target_name,
            ParentScoreMode::MaxParent,
        ) {
            Ok(result) => json_out(
                out_json,
                serde_json::to_string(&result).expect("result serializes"),
            ),
            Err(e) => fail(RcaStatus::AnalysisError, e.to_string()),
        }
    })
}

/// Returns the smallest certified top-k shortlist as
/// `{"members","confidence","k","d_max_assumed"}` JSON.
///
/// # Safety
/// `scores` must be a live handle; `out_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rca_score_ordering(
    scores: *const RcaScores,
    d_max: usize,
    alpha: f64,
    out_json: *mut *mut c_char,
) -> RcaStatus {
    guarded(|| {
        let Some(scores) = scores.as_ref() else {
            return fail(RcaStatus::NullPointer, "null scores handle");
        };
        if d_max == 0 || !(alpha > 0.0 && alpha < 1.0) {
            return fail(
                RcaStatus::InvalidArgument,
                format!("d_max {d_max} must be >= 1 and alpha {alpha} in (0, 1)"),
            );
        }
        let set = rca_core::score_ordering(&scores.inner, d_max, alpha);
        json_out(
            out_json,
            serde_json::to_string(&set).expect("set serializes"),
        )
    })
}

/// Runs the threshold traversal baseline; returns
/// `{"method","candidates","threshold"}` JSON.
///
/// # Safety
/// Handles must be live; `target` must be a valid string; `out_json` must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn rca_classic_traversal(
    scores: *const RcaScores,
    graph: *const RcaGraph,
    target: *const c_char,
    threshold: f64,
    out_json: *mut *mut c_char,
) -> RcaStatus {
    guarded(|| {
        let (Some(scores), Some(graph)) = (scores.as_ref(), graph.as_ref()) else {
            return fail(RcaStatus::NullPointer, "null handle");
        };
        let target = match read_str(target) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match rca_core::classic_traversal(&scores.inner, &graph.inner, target, threshold) {
            Ok(candidates) => {
                let value = serde_json::json!({
                    "method": "classic_traversal",
                    "candidates": candidates,
                    "threshold": threshold,
                });
                json_out(out_json, value.to_string())
            }
            Err(e) => fail(RcaStatus::AnalysisError, e.to_string()),
        }
    })
}

/// Recalibrates a sum of `m` independent anomaly scores; NaN on invalid
/// input.
#[no_mangle]
pub extern "C" fn rca_recalibrate_sum(sum_of_scores: f64, m: usize) -> f64 {
    if m == 0 || !(sum_of_scores >= 0.0) || !sum_of_scores.is_finite() {
        return f64::NAN;
    }
    rca_core::recalibrate_sum(sum_of_scores, m)
}

/// Joint anomaly score of a parent set from its marginal scores.
///
/// # Safety
/// `scores` must point to `len` doubles (or be null with `len` 0); `out`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn rca_joint_parent_score(
    scores: *const f64,
    len: usize,
    out: *mut f64,
) -> RcaStatus {
    guarded(|| {
        let Some(out) = out.as_mut() else {
            return fail(RcaStatus::NullPointer, "null output pointer");
        };
        let values: &[f64] = if len == 0 {
            &[]
        } else {
            if scores.is_null() {
                return fail(RcaStatus::NullPointer, "null scores array");
            }
            std::slice::from_raw_parts(scores, len)
        };
        match rca_core::joint_parent_score(values) {
            Ok(score) => {
                *out = score;
                RcaStatus::Ok
            }
            Err(e) => fail(RcaStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Normal-period sample count sufficient for simultaneous score estimation.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rca_required_samples(
    s_max: f64,
    delta: f64,
    alpha: f64,
    n: usize,
    out: *mut u64,
) -> RcaStatus {
    guarded(|| {
        let Some(out) = out.as_mut() else {
            return fail(RcaStatus::NullPointer, "null output pointer");
        };
        match rca_core::required_samples(s_max, delta, alpha, n) {
            Ok(k) => {
                *out = k;
                RcaStatus::Ok
            }
            Err(e) => fail(RcaStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Score typicality check on the three scores involved.
#[no_mangle]
pub extern "C" fn rca_check_score_typicality(
    conditional_score: f64,
    child_score: f64,
    parent_joint_score: f64,
) -> bool {
    rca_core::check_score_typicality(conditional_score, child_score, parent_joint_score)
}

/// P-value that a score arose under the normal marginal mechanism; NaN on
/// invalid input.
#[no_mangle]
pub extern "C" fn rca_pval_marginal(score: f64) -> f64 {
    if !(score >= 0.0) {
        return f64::NAN;
    }
    rca_core::pval_marginal(score)
}

/// P-value that an effect of the given score arose normally from a cause of
/// the given score; NaN on invalid input.
#[no_mangle]
pub extern "C" fn rca_pval_gap(effect_score: f64, cause_score: f64) -> f64 {
    if !(effect_score >= 0.0) || !(cause_score >= 0.0) {
        return f64::NAN;
    }
    rca_core::pval_gap(effect_score, cause_score)
}

/// P-value bound for two anomalies being independent; NaN on invalid input.
#[no_mangle]
pub extern "C" fn rca_pval_independent(score_x: f64, score_y: f64) -> f64 {
    if !(score_x >= 0.0) || !(score_y >= 0.0) {
        return f64::NAN;
    }
    rca_core::pval_independent(score_x, score_y)
}

/// P-value for a joint anomaly event over `n` variables; NaN on invalid
/// input.
#[no_mangle]
pub extern "C" fn rca_pval_joint(score_sum: f64, n: usize) -> f64 {
    if n < 2 || !(score_sum >= 0.0) {
        return f64::NAN;
    }
    rca_core::pval_joint(score_sum, n)
}

/// P-value for the biggest score jump not being the root cause; NaN on
/// invalid input.
#[no_mangle]
pub extern "C" fn rca_pval_maxjump(delta_max: f64, n: usize) -> f64 {
    if n < 1 || !(delta_max >= 0.0) {
        return f64::NAN;
    }
    rca_core::pval_maxjump(delta_max, n)
}

/// P-value for the root cause not being among the top-k scorers given the
/// rank-k score gap; NaN on invalid input.
#[no_mangle]
pub extern "C" fn rca_pval_topk(delta_k: f64, n: usize, d_max: usize) -> f64 {
    if n < 1 || d_max < 1 || !(delta_k >= 0.0) {
        return f64::NAN;
    }
    rca_core::pval_topk(delta_k, n, d_max)
}
