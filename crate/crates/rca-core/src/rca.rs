//! Root-cause identification from marginal anomaly scores.
//!
//! Two algorithms: a graph-aware traversal that picks the node with the
//! largest positive score jump over its parents, and a graph-free shortlist
//! that certifies the root cause sits among the top scorers. Both come with
//! explicit p-value bounds derived from the exponential calibration of
//! anomaly scores.

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::graph::{CausalDag, GraphError};
use crate::scoring::{joint_parent_score, log_poly_sum, ScoreError, ScoreVector};

#[derive(Debug, Error)]
pub enum RcaError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("scores are not aligned with graph nodes: {0}")]
    MisalignedScores(String),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SmoothTraversal,
    ScoreOrdering,
    ClassicTraversal,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::SmoothTraversal => "smooth_traversal",
            Method::ScoreOrdering => "score_ordering",
            Method::ClassicTraversal => "classic_traversal",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "smooth_traversal" | "smooth" => Ok(Method::SmoothTraversal),
            "score_ordering" | "ordering" => Ok(Method::ScoreOrdering),
            "classic_traversal" | "classic" | "traversal" => Ok(Method::ClassicTraversal),
            other => Err(format!(
                "unknown method `{other}` (expected smooth-traversal, score-ordering, or classic-traversal)"
            )),
        }
    }
}

/// How the parent reference score is formed when computing jumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParentScoreMode {
    /// Score of the highest-scoring parent. The default.
    #[default]
    MaxParent,
    /// Recalibrated joint score over all parents.
    JointParent,
}

/// Ranked root-cause candidates with score jumps and a p-value bound for
/// the hypothesis that the top jump is not the root cause.
///
/// Serializes as `{"method", "chosen", "ranking": [[name, delta], ...],
/// "p_value_bound"}`.
#[derive(Debug, Clone)]
pub struct RcaResult {
    pub method: Method,
    pub chosen: String,
    /// (variable, score jump) pairs, largest jump first; ties broken by
    /// topological position.
    pub ranking: Vec<(String, f64)>,
    pub p_value_bound: f64,
}

impl Serialize for RcaResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(4))?;
        map.serialize_entry("method", self.method.as_str())?;
        map.serialize_entry("chosen", &self.chosen)?;
        let ranking: Vec<(String, f64)> = self.ranking.clone();
        map.serialize_entry("ranking", &ranking)?;
        map.serialize_entry("p_value_bound", &self.p_value_bound)?;
        map.end()
    }
}

/// Top-k shortlist certified to contain the root cause with the reported
/// confidence.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateSet {
    /// Members in descending score order.
    pub members: Vec<String>,
    pub confidence: f64,
    pub k: usize,
    pub d_max_assumed: usize,
    /// Set when the caller knows the graph and it is not a polytree, where
    /// the coverage guarantee is not claimed.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub polytree_warning: bool,
}

impl CandidateSet {
    /// Flags the set when `dag` is not a polytree.
    pub fn with_polytree_check(mut self, dag: &CausalDag) -> Self {
        self.polytree_warning = !dag.is_polytree();
        self
    }
}

fn check_alignment(scores: &ScoreVector, dag: &CausalDag) -> Result<(), RcaError> {
    if scores.names() != dag.node_names() {
        return Err(RcaError::MisalignedScores(format!(
            "{} score entries vs {} graph nodes",
            scores.len(),
            dag.node_count()
        )));
    }
    Ok(())
}

/// Traversal over the ancestors of `target` (itself included) choosing the
/// node with the largest positive score difference to its highest-scoring
/// parent; roots compare against zero.
pub fn smooth_traversal(
    scores: &ScoreVector,
    dag: &CausalDag,
    target: &str,
) -> Result<RcaResult, RcaError> {
    smooth_traversal_with(scores, dag, Some(target), ParentScoreMode::MaxParent)
}

/// Traversal variant: `target = None` scans the whole graph, and the parent
/// reference can be switched to the recalibrated joint parent score.
pub fn smooth_traversal_with(
    scores: &ScoreVector,
    dag: &CausalDag,
    target: Option<&str>,
    mode: ParentScoreMode,
) -> Result<RcaResult, RcaError> {
    check_alignment(scores, dag)?;
    let mut candidates: Vec<usize> = match target {
        Some(name) => dag.ancestor_indices(dag.node_index(name)?),
        None => (0..dag.node_count()).collect(),
    };
    candidates.sort_by_key(|&i| dag.topo_position(i));

    let values = scores.values();
    let mut ranked: Vec<(usize, f64)> = Vec::with_capacity(candidates.len());
    for &i in &candidates {
        let parent_ref = match mode {
            ParentScoreMode::MaxParent => dag
                .parents_of(i)
                .iter()
                .map(|&p| values[p])
                .fold(0.0_f64, f64::max),
            ParentScoreMode::JointParent => {
                let parent_scores: Vec<f64> =
                    dag.parents_of(i).iter().map(|&p| values[p]).collect();
                joint_parent_score(&parent_scores)?
            }
        };
        ranked.push((i, (values[i] - parent_ref).max(0.0)));
    }

    // Candidates arrive in topological order, so a stable sort on the jump
    // leaves ties resolved by smallest topological index.
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let (chosen_idx, delta_max) = ranked[0];
    let p_value_bound = pval_maxjump(delta_max, dag.node_count());

    Ok(RcaResult {
        method: Method::SmoothTraversal,
        chosen: dag.node_name(chosen_idx).to_string(),
        ranking: ranked
            .into_iter()
            .map(|(i, d)| (dag.node_name(i).to_string(), d))
            .collect(),
        p_value_bound,
    })
}

/// Returns the smallest top-k score set whose gap to the next score
/// certifies root-cause membership at confidence `1 - alpha`, assuming the
/// causal graph is a polytree with in-degree at most `d_max`. Falls back to
/// the full variable list (confidence 1, trivially) when no gap certifies.
pub fn score_ordering(scores: &ScoreVector, d_max: usize, alpha: f64) -> CandidateSet {
    assert!(d_max >= 1, "d_max must be positive");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    let n = scores.len();
    let order = score_order(scores);
    let values = scores.values();
    let top = values[order[0]];

    for k in 1..=n {
        if k == n {
            break;
        }
        let gap = top - values[order[k]];
        let bound = (n as f64) * (d_max as f64) * (-gap).exp();
        if bound <= alpha {
            return CandidateSet {
                members: order[..k]
                    .iter()
                    .map(|&i| scores.names()[i].clone())
                    .collect(),
                confidence: 1.0 - bound.min(1.0),
                k,
                d_max_assumed: d_max,
                polytree_warning: false,
            };
        }
    }
    CandidateSet {
        members: order
            .iter()
            .map(|&i| scores.names()[i].clone())
            .collect(),
        confidence: 1.0,
        k: n,
        d_max_assumed: d_max,
        polytree_warning: false,
    }
}

/// For a fixed shortlist size `k`, reports the certified confidence for each
/// assumed maximum in-degree, so the in-degree need not be known up front.
pub fn score_ordering_confidences(
    scores: &ScoreVector,
    k: usize,
    d_max_values: &[usize],
) -> Vec<(usize, f64)> {
    assert!(k >= 1, "k must be positive");
    let n = scores.len();
    let order = score_order(scores);
    let values = scores.values();
    d_max_values
        .iter()
        .map(|&d| {
            let confidence = if k >= n {
                1.0
            } else {
                let gap = values[order[0]] - values[order[k]];
                1.0 - ((n as f64) * (d as f64) * (-gap).exp()).min(1.0)
            };
            (d, confidence)
        })
        .collect()
}

/// Indices sorted by score descending, ties by node index ascending.
fn score_order(scores: &ScoreVector) -> Vec<usize> {
    let values = scores.values();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    order
}

/// Threshold-based traversal baseline: returns every node that scores at or
/// above `threshold`, has no parent doing so, and reaches `target` along a
/// directed path of nodes all at or above `threshold`. When nothing
/// qualifies the target itself is returned so downstream recall stays
/// well-defined.
pub fn classic_traversal(
    scores: &ScoreVector,
    dag: &CausalDag,
    target: &str,
    threshold: f64,
) -> Result<Vec<String>, RcaError> {
    check_alignment(scores, dag)?;
    let t = dag.node_index(target)?;
    let values = scores.values();
    let anomalous: Vec<bool> = values.iter().map(|&s| s >= threshold).collect();

    // Walk backwards from the target through anomalous nodes only.
    let n = dag.node_count();
    let mut reaches_target = vec![false; n];
    if anomalous[t] {
        reaches_target[t] = true;
        let mut stack = vec![t];
        while let Some(u) = stack.pop() {
            for &p in dag.parents_of(u) {
                if anomalous[p] && !reaches_target[p] {
                    reaches_target[p] = true;
                    stack.push(p);
                }
            }
        }
    }

    let mut result: Vec<usize> = (0..n)
        .filter(|&i| {
            anomalous[i]
                && reaches_target[i]
                && dag.parents_of(i).iter().all(|&p| !anomalous[p])
        })
        .collect();
    if result.is_empty() {
        result.push(t);
    }
    Ok(result
        .into_iter()
        .map(|i| dag.node_name(i).to_string())
        .collect())
}

/// P-value for the hypothesis that a value with the given anomaly score was
/// generated by its usual marginal mechanism.
pub fn pval_marginal(score: f64) -> f64 {
    assert!(score >= 0.0, "score must be nonnegative");
    (-score).exp()
}

/// P-value for an effect with score `effect_score` having been generated
/// normally from a cause with score `cause_score`: anomalies rarely cause
/// larger anomalies.
pub fn pval_gap(effect_score: f64, cause_score: f64) -> f64 {
    assert!(effect_score >= 0.0 && cause_score >= 0.0);
    (-(effect_score - cause_score).max(0.0)).exp()
}

/// P-value bound for two anomalies having been generated independently.
pub fn pval_independent(score_x: f64, score_y: f64) -> f64 {
    assert!(score_x >= 0.0 && score_y >= 0.0);
    let s = score_x + score_y;
    ((1.0 + s) * (-s).exp()).min(1.0)
}

/// P-value for a joint anomaly event over `n` variables from the summed
/// conditional scores of the other `n - 1`, via the Erlang tail.
pub fn pval_joint(score_sum: f64, n: usize) -> f64 {
    assert!(score_sum >= 0.0, "score sum must be nonnegative");
    assert!(n >= 2, "joint p-value needs at least two variables");
    (log_poly_sum(score_sum, n - 1) - score_sum).exp().min(1.0)
}

/// P-value for the node with the biggest score jump over its parents not
/// being the root cause.
pub fn pval_maxjump(delta_max: f64, n: usize) -> f64 {
    assert!(delta_max >= 0.0, "delta must be nonnegative");
    assert!(n >= 1, "graph must be nonempty");
    // 1 - (1 - e^-d)^(n-1), computed via ln_1p/exp_m1 to keep precision at
    // large deltas.
    let log_keep = (-(-delta_max).exp()).ln_1p();
    -(((n - 1) as f64) * log_keep).exp_m1()
}

/// P-value for the root cause not being among the top-k scorers when the
/// score gap to rank k+1 is `delta_k`.
pub fn pval_topk(delta_k: f64, n: usize, d_max: usize) -> f64 {
    assert!(delta_k >= 0.0 && n >= 1 && d_max >= 1);
    ((n as f64) * (d_max as f64) * (-delta_k).exp()).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CausalDag;
    use crate::scoring::{estimate_scores, Dataset, FeatureKind, ScoreVector};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain3() -> CausalDag {
        CausalDag::new(
            vec!["X1".into(), "X2".into(), "X3".into()],
            &[("X1", "X2"), ("X2", "X3")],
        )
        .unwrap()
    }

    fn sv(names: &[&str], scores: &[f64]) -> ScoreVector {
        ScoreVector::new(
            names.iter().map(|s| s.to_string()).collect(),
            scores.to_vec(),
            1_000_000,
        )
        .unwrap()
    }

    #[test]
    fn smooth_traversal_chain() {
        let dag = chain3();
        let scores = sv(&["X1", "X2", "X3"], &[2.0, 9.0, 10.0]);
        let result = smooth_traversal(&scores, &dag, "X3").unwrap();
        assert_eq!(result.chosen, "X2");
        let deltas: Vec<f64> = result.ranking.iter().map(|(_, d)| *d).collect();
        assert_eq!(deltas, vec![7.0, 2.0, 1.0]);
        assert_eq!(result.ranking[0].0, "X2");
    }

    #[test]
    fn smooth_traversal_single_node() {
        let dag = CausalDag::new(vec!["A".into()], &[] as &[(&str, &str)]).unwrap();
        let scores = sv(&["A"], &[4.0]);
        let result = smooth_traversal(&scores, &dag, "A").unwrap();
        assert_eq!(result.chosen, "A");
        assert_eq!(result.ranking, vec![("A".to_string(), 4.0)]);
        // With one node there are no competing mechanisms at all.
        assert_eq!(result.p_value_bound, 0.0);
    }

    #[test]
    fn smooth_traversal_collider() {
        let dag = CausalDag::new(
            vec!["X1".into(), "X2".into(), "X3".into()],
            &[("X1", "X3"), ("X2", "X3")],
        )
        .unwrap();
        let scores = sv(&["X1", "X2", "X3"], &[3.0, 8.0, 4.0]);
        let result = smooth_traversal(&scores, &dag, "X3").unwrap();
        assert_eq!(result.chosen, "X2");
        let by_name: std::collections::HashMap<_, _> =
            result.ranking.iter().cloned().collect();
        assert_eq!(by_name["X1"], 3.0);
        assert_eq!(by_name["X2"], 8.0);
        assert_eq!(by_name["X3"], 0.0);
    }

    #[test]
    fn smooth_traversal_restricts_to_ancestors() {
        // X3 is not an ancestor of X2, so it must not be ranked.
        let dag = chain3();
        let scores = sv(&["X1", "X2", "X3"], &[1.0, 2.0, 10.0]);
        let result = smooth_traversal(&scores, &dag, "X2").unwrap();
        assert_eq!(result.ranking.len(), 2);
        assert!(result.ranking.iter().all(|(n, _)| n != "X3"));
    }

    #[test]
    fn smooth_traversal_tie_breaks_by_topological_index() {
        let dag = CausalDag::new(
            vec!["A".into(), "B".into()],
            &[] as &[(&str, &str)],
        )
        .unwrap();
        let scores = sv(&["A", "B"], &[3.0, 3.0]);
        let result = smooth_traversal_with(&scores, &dag, None, ParentScoreMode::MaxParent)
            .unwrap();
        assert_eq!(result.chosen, "A");
    }

    #[test]
    fn smooth_traversal_misaligned_scores() {
        let dag = chain3();
        let scores = sv(&["X1", "X2"], &[1.0, 2.0]);
        assert!(matches!(
            smooth_traversal(&scores, &dag, "X2").unwrap_err(),
            RcaError::MisalignedScores(_)
        ));
    }

    #[test]
    fn smooth_traversal_joint_mode() {
        let dag = CausalDag::new(
            vec!["X1".into(), "X2".into(), "X3".into()],
            &[("X1", "X3"), ("X2", "X3")],
        )
        .unwrap();
        let scores = sv(&["X1", "X2", "X3"], &[3.0, 4.0, 10.0]);
        let joint = smooth_traversal_with(
            &scores,
            &dag,
            Some("X3"),
            ParentScoreMode::JointParent,
        )
        .unwrap();
        // Joint parent score 7 - ln 8; the jump at X3 is 10 minus that.
        let expected = 10.0 - 4.920558458320164;
        let x3 = joint.ranking.iter().find(|(n, _)| n == "X3").unwrap();
        assert!((x3.1 - expected).abs() < 1e-12);
    }

    #[test]
    fn score_ordering_certifies_singleton() {
        let scores = sv(&["a", "b", "c", "d"], &[12.0, 5.0, 4.0, 1.0]);
        let set = score_ordering(&scores, 2, 0.05);
        assert_eq!(set.k, 1);
        assert_eq!(set.members, vec!["a".to_string()]);
        // 1 - 8 e^-7, evaluated independently.
        assert!((set.confidence - (1.0 - 0.00729505572443613)).abs() < 1e-12);
        assert!(set.confidence >= 0.95);
    }

    #[test]
    fn score_ordering_all_tied_returns_everything() {
        let scores = sv(&["a", "b", "c"], &[2.0, 2.0, 2.0]);
        let set = score_ordering(&scores, 1, 0.05);
        assert_eq!(set.k, 3);
        assert_eq!(set.members.len(), 3);
        assert_eq!(set.confidence, 1.0);
    }

    #[test]
    fn score_ordering_loose_alpha_still_full_list() {
        // n * d_max * e^0 = 3 > alpha for every gap of zero.
        let scores = sv(&["a", "b", "c"], &[1.0, 1.0, 1.0]);
        let set = score_ordering(&scores, 1, 0.99);
        assert_eq!(set.k, 3);
    }

    #[test]
    fn score_ordering_nesting_in_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.random_range(2..12);
            let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
            let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
            let scores = ScoreVector::new(names, values, 1_000_000).unwrap();
            let loose = score_ordering(&scores, 2, 0.2);
            let tight = score_ordering(&scores, 2, 0.01);
            for m in &loose.members {
                assert!(tight.members.contains(m), "tight set must contain loose set");
            }
        }
    }

    #[test]
    fn score_ordering_confidence_profile() {
        let scores = sv(&["a", "b", "c", "d"], &[12.0, 5.0, 4.0, 1.0]);
        let profile = score_ordering_confidences(&scores, 1, &[1, 2, 50]);
        assert_eq!(profile.len(), 3);
        assert!(profile[0].1 > profile[1].1);
        // Large assumed in-degree drives the certificate to nothing.
        assert!(profile[2].1 >= 0.0);
        let full = score_ordering_confidences(&scores, 4, &[3]);
        assert_eq!(full[0].1, 1.0);
    }

    #[test]
    fn classic_traversal_cases() {
        let dag = chain3();
        let root_cause = classic_traversal(
            &sv(&["X1", "X2", "X3"], &[5.0, 4.0, 6.0]),
            &dag,
            "X3",
            3.0,
        )
        .unwrap();
        assert_eq!(root_cause, vec!["X1".to_string()]);

        let broken_path = classic_traversal(
            &sv(&["X1", "X2", "X3"], &[5.0, 2.0, 6.0]),
            &dag,
            "X3",
            3.0,
        )
        .unwrap();
        assert_eq!(broken_path, vec!["X3".to_string()]);

        let nothing_anomalous = classic_traversal(
            &sv(&["X1", "X2", "X3"], &[1.0, 0.5, 0.2]),
            &dag,
            "X3",
            3.0,
        )
        .unwrap();
        assert_eq!(nothing_anomalous, vec!["X3".to_string()]);
    }

    #[test]
    fn pval_marginal_values() {
        assert_eq!(pval_marginal(0.0), 1.0);
        assert!((pval_marginal(5.0) - (-5.0_f64).exp()).abs() < 1e-18);
        assert!((pval_marginal(10.0) - 4.5399929762484854e-5).abs() < 1e-15);
    }

    #[test]
    fn pval_gap_values() {
        assert_eq!(pval_gap(5.0, 10.0), 1.0);
        assert!((pval_gap(10.0, 5.0) - (-5.0_f64).exp()).abs() < 1e-18);
        assert_eq!(pval_gap(4.0, 4.0), 1.0);
    }

    #[test]
    fn pval_independent_values() {
        assert!((pval_independent(10.0, 5.0) - 4.8944371280292126e-6).abs() < 1e-15);
        assert_eq!(pval_independent(0.0, 0.0), 1.0);
        assert!((pval_independent(3.0, 3.0) - 0.01735126523666451).abs() < 1e-15);
    }

    #[test]
    fn pval_independent_matches_joint_of_three() {
        for &(x, y) in &[(0.5, 0.25), (2.0, 3.0), (7.0, 1.0)] {
            assert!((pval_independent(x, y) - pval_joint(x + y, 3)).abs() < 1e-15);
        }
    }

    #[test]
    fn pval_joint_values() {
        assert!((pval_joint(4.2, 2) - pval_marginal(4.2)).abs() < 1e-15);
        assert_eq!(pval_joint(0.0, 7), 1.0);
        assert!((pval_joint(10.0, 4) - 0.0027693957155115762).abs() < 1e-15);
    }

    #[test]
    fn pval_maxjump_values() {
        assert_eq!(pval_maxjump(0.0, 5), 1.0);
        assert!((pval_maxjump(2.0_f64.ln(), 2) - 0.5).abs() < 1e-15);
        assert!((pval_maxjump(5.0, 10) - 0.059032563351928746).abs() < 1e-14);
    }

    #[test]
    fn pval_topk_values() {
        assert_eq!(pval_topk(0.0, 4, 2), 1.0);
        assert!((pval_topk(10.0, 50, 3) - 0.0068099894643727284).abs() < 1e-15);
        // Gap needed for alpha = 0.05 at n = 50, d_max = 3 is ln 3000.
        let needed = (50.0_f64 * 3.0 / 0.05).ln();
        assert!((needed - 8.006367567650246).abs() < 1e-12);
        assert!(pval_topk(needed, 50, 3) <= 0.05 + 1e-12);
    }

    #[test]
    fn pvals_bounded_and_monotone() {
        let grid: Vec<f64> = (0..60).map(|i| i as f64 * 0.25).collect();
        let mut previous = [1.0_f64; 4];
        for &s in &grid {
            let current = [
                pval_marginal(s),
                pval_joint(s, 6),
                pval_maxjump(s, 12),
                pval_topk(s, 12, 3),
            ];
            for (c, p) in current.iter().zip(previous.iter()) {
                assert!(*c >= 0.0 && *c <= 1.0);
                assert!(c <= p, "p-values must not increase in the score");
            }
            previous = current;
        }
    }

    /// Scores depend only on exceedance ranks, so any strictly increasing
    /// transform of the data leaves every decision unchanged.
    #[test]
    fn scale_invariance_of_decisions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dag = CausalDag::new(
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            &[("a", "b"), ("b", "c"), ("a", "d")],
        )
        .unwrap();
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..80)
                .map(|_| (0..4).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect())
                .collect();
            let anomalous: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
            let transform = |x: f64| (x * 0.7).exp() + x.powi(3) * 0.01;

            let names: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
            let base = Dataset::new(names.clone(), rows.clone(), anomalous.clone()).unwrap();
            let mapped = Dataset::new(
                names,
                rows.iter()
                    .map(|r| r.iter().map(|&v| transform(v)).collect())
                    .collect(),
                anomalous.iter().map(|&v| transform(v)).collect(),
            )
            .unwrap();

            let s1 = estimate_scores(&base, FeatureKind::Identity).unwrap();
            let s2 = estimate_scores(&mapped, FeatureKind::Identity).unwrap();
            assert_eq!(s1.values(), s2.values());

            let r1 = smooth_traversal(&s1, &dag, "c").unwrap();
            let r2 = smooth_traversal(&s2, &dag, "c").unwrap();
            assert_eq!(r1.chosen, r2.chosen);

            let o1 = score_ordering(&s1, 2, 0.1);
            let o2 = score_ordering(&s2, 2, 0.1);
            assert_eq!(o1.members, o2.members);
        }
    }

    #[test]
    fn result_json_shape() {
        let dag = chain3();
        let scores = sv(&["X1", "X2", "X3"], &[2.0, 9.0, 10.0]);
        let result = smooth_traversal(&scores, &dag, "X3").unwrap();
        let json: serde_json::Value =
            serde_json::from_str(&serde_json::to_string(&result).unwrap()).unwrap();
        assert_eq!(json["method"], "smooth_traversal");
        assert_eq!(json["chosen"], "X2");
        assert_eq!(json["ranking"][0][0], "X2");
        assert_eq!(json["ranking"][0][1], 7.0);
        assert!(json["p_value_bound"].is_f64());

        let set = score_ordering(&scores, 2, 0.05);
        let json: serde_json::Value =
            serde_json::from_str(&serde_json::to_string(&set).unwrap()).unwrap();
        assert!(json["members"].is_array());
        assert!(json["confidence"].is_f64());
        assert!(json["k"].is_u64());
    }
}
