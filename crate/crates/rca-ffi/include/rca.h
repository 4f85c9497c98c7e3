/* C interface to the root-cause analysis toolkit. */

#ifndef RCA_H
#define RCA_H

/* Generated by cbindgen from crates/rca-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of a fallible call.
typedef enum RcaStatus {
  RCA_STATUS_OK = 0,
  // A required pointer argument was null.
  RCA_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  RCA_STATUS_INVALID_UTF8 = 2,
  // An argument was out of range.
  RCA_STATUS_INVALID_ARGUMENT = 3,
  // Graph construction or perturbation failed.
  RCA_STATUS_GRAPH_ERROR = 4,
  // Dataset construction or score estimation failed.
  RCA_STATUS_SCORING_ERROR = 5,
  // An analysis method failed.
  RCA_STATUS_ANALYSIS_ERROR = 6,
  // An internal panic was caught at the boundary.
  RCA_STATUS_PANIC = 7,
} RcaStatus;

// Feature map selector for score estimation.
typedef enum RcaFeature {
  RCA_FEATURE_IDENTITY = 0,
  RCA_FEATURE_Z_SCORE = 1,
  RCA_FEATURE_ABS_Z_SCORE = 2,
} RcaFeature;

// Opaque dataset handle.
typedef struct RcaDataset RcaDataset;

// Opaque causal graph handle.
typedef struct RcaGraph RcaGraph;

// Opaque score vector handle.
typedef struct RcaScores RcaScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null when no
// failure has been recorded. The pointer stays valid until the next
// failing call on the same thread.
const char *rca_last_error_message(void);

// Frees a string returned by this library.
//
// # Safety
// `s` must be a pointer previously returned by one of the `*_to_json` or
// analysis functions, not yet freed. Null is ignored.
void rca_string_free(char *s);

// Parses a graph from `{"nodes": [...], "edges": [["parent","child"],...]}`.
//
// # Safety
// `json` must be a valid NUL-terminated string; `out` must be a valid
// pointer. On success the caller owns the handle and must free it with
// [`rca_graph_free`].
enum RcaStatus rca_graph_from_json(const char *json, struct RcaGraph **out);

// Serializes a graph back to JSON; free the string with [`rca_string_free`].
//
// # Safety
// `graph` must be a live handle from this library; `out` must be valid.
enum RcaStatus rca_graph_to_json(const struct RcaGraph *graph, char **out);

// # Safety
// `graph` must be a handle from this library, not yet freed. Null is a no-op.
void rca_graph_free(struct RcaGraph *graph);

// # Safety
// `graph` and `out` must be valid pointers.
enum RcaStatus rca_graph_node_count(const struct RcaGraph *graph, uintptr_t *out);

// True when the graph's undirected skeleton is a forest.
//
// # Safety
// `graph` and `out` must be valid pointers.
enum RcaStatus rca_graph_is_polytree(const struct RcaGraph *graph, bool *out);

// # Safety
// `graph` and `out` must be valid pointers.
enum RcaStatus rca_graph_max_in_degree(const struct RcaGraph *graph, uintptr_t *out);

// Randomly edits the graph to exactly `target_shd` structural Hamming
// distance, preserving edge density.
//
// # Safety
// `graph` must be a live handle; `out` must be valid. The caller owns the
// returned handle.
enum RcaStatus rca_graph_perturb(const struct RcaGraph *graph,
                                 uintptr_t target_shd,
                                 uint64_t seed,
                                 struct RcaGraph **out);

// Builds a dataset from a row-major normal matrix and one anomalous row.
//
// # Safety
// `names` must point to `n_vars` NUL-terminated strings; `normal` must hold
// `n_rows * n_vars` doubles; `anomalous` must hold `n_vars` doubles; `out`
// must be valid. The caller owns the returned handle.
enum RcaStatus rca_dataset_new(const char *const *names,
                               uintptr_t n_vars,
                               const double *normal,
                               uintptr_t n_rows,
                               const double *anomalous,
                               struct RcaDataset **out);

// Reads a dataset from a CSV with a header row; `anomalous_row` selects the
// 0-based anomalous data row, or -1 for the last row.
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` must be valid.
enum RcaStatus rca_dataset_from_csv(const char *path,
                                    int64_t anomalous_row,
                                    struct RcaDataset **out);

// # Safety
// `dataset` must be a handle from this library, not yet freed. Null is a
// no-op.
void rca_dataset_free(struct RcaDataset *dataset);

// Estimates per-variable anomaly scores for the dataset's anomalous row.
//
// # Safety
// `dataset` must be a live handle; `out` must be valid. The caller owns the
// returned handle.
enum RcaStatus rca_estimate_scores(const struct RcaDataset *dataset,
                                   enum RcaFeature feature,
                                   struct RcaScores **out);

// Wraps precomputed scores; `sample_count` is the k used when estimating
// them, which caps valid scores at ln k.
//
// # Safety
// `names` must point to `n` NUL-terminated strings and `values` to `n`
// doubles; `out` must be valid.
enum RcaStatus rca_scores_new(const char *const *names,
                              const double *values,
                              uintptr_t n,
                              uintptr_t sample_count,
                              struct RcaScores **out);

// # Safety
// `scores` and `out` must be valid pointers.
enum RcaStatus rca_scores_len(const struct RcaScores *scores, uintptr_t *out);

// Looks up one variable's score by name.
//
// # Safety
// All pointers must be valid.
enum RcaStatus rca_scores_value(const struct RcaScores *scores, const char *name, double *out);

// Serializes scores as `{"scores": {...}, "k": n}`; free with
// [`rca_string_free`].
//
// # Safety
// `scores` must be a live handle; `out` must be valid.
enum RcaStatus rca_scores_to_json(const struct RcaScores *scores, char **out);

// # Safety
// `scores` must be a handle from this library, not yet freed. Null is a
// no-op.
void rca_scores_free(struct RcaScores *scores);

// Runs the score-jump traversal; `target` anchors the scan to the target's
// ancestors, or pass null to scan the whole graph. Returns the result as
// `{"method","chosen","ranking","p_value_bound"}` JSON.
//
// # Safety
// Handles must be live; `target` may be null; `out_json` must be valid.
enum RcaStatus rca_smooth_traversal(const struct RcaScores *scores,
                                    const struct RcaGraph *graph,
                                    const char *target,
                                    char **out_json);

// Returns the smallest certified top-k shortlist as
// `{"members","confidence","k","d_max_assumed"}` JSON.
//
// # Safety
// `scores` must be a live handle; `out_json` must be valid.
enum RcaStatus rca_score_ordering(const struct RcaScores *scores,
                                  uintptr_t d_max,
                                  double alpha,
                                  char **out_json);

// Runs the threshold traversal baseline; returns
// `{"method","candidates","threshold"}` JSON.
//
// # Safety
// Handles must be live; `target` must be a valid string; `out_json` must be
// valid.
enum RcaStatus rca_classic_traversal(const struct RcaScores *scores,
                                     const struct RcaGraph *graph,
                                     const char *target,
                                     double threshold,
                                     char **out_json);

// Recalibrates a sum of `m` independent anomaly scores; NaN on invalid
// input.
double rca_recalibrate_sum(double sum_of_scores, uintptr_t m);

// Joint anomaly score of a parent set from its marginal scores.
//
// # Safety
// `scores` must point to `len` doubles (or be null with `len` 0); `out`
// must be valid.
enum RcaStatus rca_joint_parent_score(const double *scores, uintptr_t len, double *out);

// Normal-period sample count sufficient for simultaneous score estimation.
//
// # Safety
// `out` must be a valid pointer.
enum RcaStatus rca_required_samples(double s_max,
                                    double delta,
                                    double alpha,
                                    uintptr_t n,
                                    uint64_t *out);

// Score typicality check on the three scores involved.
bool rca_check_score_typicality(double conditional_score,
                                double child_score,
                                double parent_joint_score);

// P-value that a score arose under the normal marginal mechanism; NaN on
// invalid input.
double rca_pval_marginal(double score);

// P-value that an effect of the given score arose normally from a cause of
// the given score; NaN on invalid input.
double rca_pval_gap(double effect_score, double cause_score);

// P-value bound for two anomalies being independent; NaN on invalid input.
double rca_pval_independent(double score_x, double score_y);

// P-value for a joint anomaly event over `n` variables; NaN on invalid
// input.
double rca_pval_joint(double score_sum, uintptr_t n);

// P-value for the biggest score jump not being the root cause; NaN on
// invalid input.
double rca_pval_maxjump(double delta_max, uintptr_t n);

// P-value for the root cause not being among the top-k scorers given the
// rank-k score gap; NaN on invalid input.
double rca_pval_topk(double delta_k, uintptr_t n, uintptr_t d_max);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RCA_H */
