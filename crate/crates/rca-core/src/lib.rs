//! Root-cause analysis for a single anomalous observation using only
//! marginal information-theoretic anomaly scores.
//!
//! Given samples from a normal period and one anomalous row, the toolkit
//! identifies the variable whose causal mechanism most plausibly changed:
//! with a known causal graph via a score-jump traversal, and without one via
//! a certified top-k shortlist. A synthetic structural-causal-model harness
//! generates benchmark problems and validates the probabilistic guarantees
//! behind both methods.

pub mod bench;
pub mod graph;
pub mod rca;
pub mod scm;
pub mod scoring;

pub use graph::{perturb_graph, shd, CausalDag, GraphError};
pub use rca::{
    classic_traversal, pval_gap, pval_independent, pval_joint, pval_marginal, pval_maxjump,
    pval_topk, score_ordering, score_ordering_confidences, smooth_traversal,
    smooth_traversal_with, CandidateSet, Method, ParentScoreMode, RcaError, RcaResult,
};
pub use scm::{
    cholesky_source_matrix, sample_random_scm, score_inversion_report, InjectionMode, LinearScm,
    Mechanism, NodeModel, NoiseSpec, Scm, ScmConfig, ScmError, ScoreInversionReport,
};
pub use scoring::{
    check_score_typicality, column_means, column_stds, estimate_it_score, estimate_scores,
    joint_parent_score, recalibrate_sum, required_samples, Dataset, FeatureKind, FeatureMap,
    ScoreError, ScoreVector,
};
