//! Experiment harness: synthetic trials over random SCMs, tie-aware top-k
//! recall, and per-method runtime measurement.
//!
//! Trials are independent and run in parallel; every random stream is
//! derived from the experiment seed and trial coordinates, so reports are
//! identical regardless of worker count.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::perturb_graph;
use crate::rca::{classic_traversal, score_ordering, smooth_traversal, Method};
use crate::scm::{sample_random_scm, ScmConfig};
use crate::scoring::{column_stds, estimate_scores, Dataset, FeatureKind};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("rankings and truths are misaligned: {0} vs {1}")]
    Misaligned(usize, usize),
}

/// Tie handling when scoring ranked output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieMode {
    /// A hit if the truth is anywhere in the top-k rank groups, including
    /// every member tied at the boundary.
    WithTies,
    /// Ties are shuffled uniformly before cutting at k.
    RandomAmongTies,
}

impl TieMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TieMode::WithTies => "with_ties",
            TieMode::RandomAmongTies => "random_among_ties",
        }
    }
}

/// A method's ranked output as descending preference groups; members of a
/// group are tied. Variables a method does not rank are simply absent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedGroups(pub Vec<Vec<String>>);

impl RankedGroups {
    /// Groups consecutive equal values of an already-sorted scored list.
    pub fn from_sorted_scored(items: &[(String, f64)]) -> Self {
        let mut groups: Vec<Vec<String>> = Vec::new();
        let mut last: Option<f64> = None;
        for (name, value) in items {
            match last {
                Some(prev) if prev == *value => groups.last_mut().unwrap().push(name.clone()),
                _ => groups.push(vec![name.clone()]),
            }
            last = Some(*value);
        }
        RankedGroups(groups)
    }
}

/// Fraction of trials whose truth lands in the top-k of the ranking, under
/// the requested tie handling.
pub fn topk_recall<R: Rng + ?Sized>(
    rankings: &[RankedGroups],
    truths: &[String],
    k: usize,
    tie_mode: TieMode,
    rng: &mut R,
) -> Result<f64, BenchError> {
    if rankings.len() != truths.len() {
        return Err(BenchError::Misaligned(rankings.len(), truths.len()));
    }
    if rankings.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for (ranking, truth) in rankings.iter().zip(truths) {
        let hit = match tie_mode {
            TieMode::WithTies => {
                let mut taken = 0usize;
                let mut found = false;
                for group in &ranking.0 {
                    if taken >= k {
                        break;
                    }
                    if group.contains(truth) {
                        found = true;
                        break;
                    }
                    taken += group.len();
                }
                found
            }
            TieMode::RandomAmongTies => {
                let mut flat: Vec<&String> = Vec::new();
                for group in &ranking.0 {
                    let mut members: Vec<&String> = group.iter().collect();
                    members.shuffle(rng);
                    flat.extend(members);
                }
                flat.iter().take(k).any(|name| *name == truth)
            }
        };
        if hit {
            hits += 1;
        }
    }
    Ok(hits as f64 / rankings.len() as f64)
}

/// Experiment description, readable from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_nodes: usize,
    #[serde(default)]
    pub polytree: bool,
    #[serde(default = "default_linear_probability")]
    pub linear_probability: f64,
    pub anomaly_strengths: Vec<f64>,
    pub trials_per_point: usize,
    #[serde(default = "default_normal_samples")]
    pub normal_samples: usize,
    pub methods: Vec<MethodName>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Assumed maximum in-degree for the shortlist method; when absent the
    /// true graph's maximum in-degree is used per trial.
    #[serde(default)]
    pub d_max: Option<usize>,
    /// Absolute target structural Hamming distance applied to the graph
    /// handed to graph-based methods.
    #[serde(default)]
    pub shd_perturbation: Option<usize>,
    /// Target SHD as a fraction of the trial graph's edge count; mutually
    /// exclusive with `shd_perturbation`.
    #[serde(default)]
    pub shd_edge_ratio: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub feature: FeatureKind,
    #[serde(default = "default_classic_threshold")]
    pub classic_threshold: f64,
    /// Restrict linear coefficients, e.g. to positive values for monotone
    /// mechanisms.
    #[serde(default)]
    pub linear_coeff_range: Option<(f64, f64)>,
    /// Keep per-trial records for the JSON-lines audit log.
    #[serde(default)]
    pub log_trials: bool,
}

fn default_linear_probability() -> f64 {
    0.2
}
fn default_normal_samples() -> usize {
    1000
}
fn default_alpha() -> f64 {
    0.05
}
fn default_classic_threshold() -> f64 {
    3.0
}

/// Method name as written in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    SmoothTraversal,
    ScoreOrdering,
    ClassicTraversal,
}

impl From<MethodName> for Method {
    fn from(name: MethodName) -> Method {
        match name {
            MethodName::SmoothTraversal => Method::SmoothTraversal,
            MethodName::ScoreOrdering => Method::ScoreOrdering,
            MethodName::ClassicTraversal => Method::ClassicTraversal,
        }
    }
}

impl ExperimentConfig {
    pub fn new(n_nodes: usize, strengths: Vec<f64>, trials: usize, seed: u64) -> Self {
        ExperimentConfig {
            n_nodes,
            polytree: false,
            linear_probability: default_linear_probability(),
            anomaly_strengths: strengths,
            trials_per_point: trials,
            normal_samples: default_normal_samples(),
            methods: vec![
                MethodName::SmoothTraversal,
                MethodName::ScoreOrdering,
                MethodName::ClassicTraversal,
            ],
            alpha: default_alpha(),
            d_max: None,
            shd_perturbation: None,
            shd_edge_ratio: None,
            seed,
            feature: FeatureKind::default(),
            classic_threshold: default_classic_threshold(),
            linear_coeff_range: None,
            log_trials: false,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.n_nodes == 0 {
            return Err(BenchError::Config("n_nodes must be positive".into()));
        }
        if self.anomaly_strengths.is_empty() {
            return Err(BenchError::Config("anomaly_strengths is empty".into()));
        }
        if self.trials_per_point == 0 {
            return Err(BenchError::Config("trials_per_point must be positive".into()));
        }
        if self.normal_samples == 0 {
            return Err(BenchError::Config("normal_samples must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(BenchError::Config("no methods requested".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(BenchError::Config(format!(
                "alpha {} not in (0, 1)",
                self.alpha
            )));
        }
        if self.shd_perturbation.is_some() && self.shd_edge_ratio.is_some() {
            return Err(BenchError::Config(
                "set at most one of shd_perturbation and shd_edge_ratio".into(),
            ));
        }
        if let Some(r) = self.shd_edge_ratio {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(BenchError::Config(format!("bad shd_edge_ratio {r}")));
            }
        }
        Ok(())
    }

    fn scm_config(&self) -> ScmConfig {
        let mut config = ScmConfig::new(self.n_nodes);
        config.polytree = self.polytree;
        config.linear_probability = self.linear_probability;
        if let Some(range) = self.linear_coeff_range {
            config.linear_coeff_range = range;
        }
        config
    }
}

/// One aggregated metric cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub strength: f64,
    pub k: usize,
    pub tie_mode: String,
    pub recall: f64,
    pub stderr: f64,
    pub mean_runtime_ms: f64,
    pub trials: usize,
    pub failures: usize,
}

/// Per-trial audit record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialLog {
    pub strength: f64,
    pub trial: usize,
    pub truth: String,
    pub target: String,
    pub results: Vec<TrialMethodLog>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialMethodLog {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranking: Option<RankedGroups>,
    pub runtime_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricRow>,
    /// Trials that failed before any method ran, per strength.
    pub trial_failures: Vec<(f64, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trial_log: Option<Vec<TrialLog>>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,strength,k,tie_mode,recall,stderr,mean_runtime_ms,trials,failures\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                row.method,
                row.strength,
                row.k,
                row.tie_mode,
                row.recall,
                row.stderr,
                row.mean_runtime_ms,
                row.trials,
                row.failures
            ));
        }
        out
    }

    /// Compact table of top-1 with-ties recall per method and strength.
    pub fn summary_table(&self) -> String {
        let mut out = String::from("method              strength  top1_recall  stderr   runtime_ms\n");
        for row in &self.rows {
            if row.k == 1 && row.tie_mode == "with_ties" {
                out.push_str(&format!(
                    "{:<19} {:>8.2}  {:>11.3}  {:>6.3}  {:>10.3}\n",
                    row.method, row.strength, row.recall, row.stderr, row.mean_runtime_ms
                ));
            }
        }
        out
    }

    pub fn row(&self, method: &str, strength: f64, k: usize, tie_mode: TieMode) -> Option<&MetricRow> {
        self.rows.iter().find(|r| {
            r.method == method
                && r.strength == strength
                && r.k == k
                && r.tie_mode == tie_mode.as_str()
        })
    }
}

struct TrialOutcome {
    truth: String,
    target: String,
    per_method: Vec<Result<(RankedGroups, f64), String>>,
}

/// Seed mixing for independent per-trial streams.
fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    splitmix(base ^ splitmix(a.wrapping_add(1) ^ splitmix(b.wrapping_add(2))))
}

fn run_trial(
    config: &ExperimentConfig,
    strength_idx: usize,
    trial_idx: usize,
) -> Result<TrialOutcome, String> {
    let strength = config.anomaly_strengths[strength_idx];
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        config.seed,
        strength_idx as u64,
        trial_idx as u64,
    ));

    let scm = sample_random_scm(&config.scm_config(), &mut rng).map_err(|e| e.to_string())?;
    let dag = scm.dag();
    let rows = scm.sample_normal(config.normal_samples, &mut rng);
    let names = dag.node_names().to_vec();

    let root_cause = rng.random_range(0..dag.node_count());
    let descendants = dag.descendant_indices(root_cause);
    let target = descendants[rng.random_range(0..descendants.len())];
    let truth = names[root_cause].clone();
    let target_name = names[target].clone();

    let stds = column_stds(&rows);
    let anomalous = scm
        .inject_anomaly(&truth, strength, &stds, &mut rng)
        .map_err(|e| e.to_string())?;
    let dataset = Dataset::new(names.clone(), rows, anomalous).map_err(|e| e.to_string())?;
    let scores = estimate_scores(&dataset, config.feature).map_err(|e| e.to_string())?;

    let shd_target = match (config.shd_perturbation, config.shd_edge_ratio) {
        (Some(t), _) => Some(t),
        (None, Some(r)) => Some((r * dag.edge_count() as f64).round() as usize),
        (None, None) => None,
    };
    let given_graph = match shd_target {
        Some(0) | None => dag.clone(),
        Some(t) => perturb_graph(dag, t, &mut rng).map_err(|e| e.to_string())?,
    };

    let d_max = config
        .d_max
        .unwrap_or_else(|| dag.max_in_degree())
        .max(1);

    let per_method = config
        .methods
        .iter()
        .map(|&name| match name {
            MethodName::SmoothTraversal => {
                let start = Instant::now();
                let result = smooth_traversal(&scores, &given_graph, &target_name);
                let elapsed = start.elapsed().as_secs_f64() * 1e3;
                result
                    .map(|r| (RankedGroups::from_sorted_scored(&r.ranking), elapsed))
                    .map_err(|e| e.to_string())
            }
            MethodName::ScoreOrdering => {
                let start = Instant::now();
                let _set = score_ordering(&scores, d_max, config.alpha);
                let elapsed = start.elapsed().as_secs_f64() * 1e3;
                // Recall is evaluated on the full score ordering with ties.
                let mut scored: Vec<(String, f64)> = scores
                    .names()
                    .iter()
                    .cloned()
                    .zip(scores.values().iter().copied())
                    .collect();
                scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
                Ok((RankedGroups::from_sorted_scored(&scored), elapsed))
            }
            MethodName::ClassicTraversal => {
                let start = Instant::now();
                let result = classic_traversal(
                    &scores,
                    &given_graph,
                    &target_name,
                    config.classic_threshold,
                );
                let elapsed = start.elapsed().as_secs_f64() * 1e3;
                result
                    .map(|candidates| {
                        let mut scored: Vec<(String, f64)> = candidates
                            .into_iter()
                            .map(|name| {
                                let v = scores.value_of(&name).unwrap_or(0.0);
                                (name, v)
                            })
                            .collect();
                        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
                        (RankedGroups::from_sorted_scored(&scored), elapsed)
                    })
                    .map_err(|e| e.to_string())
            }
        })
        .collect();

    Ok(TrialOutcome {
        truth,
        target: target_name,
        per_method,
    })
}

/// Runs the full grid: per strength and trial, sample an SCM, draw normal
/// data, inject an anomaly at a random root cause, score, run every method,
/// and aggregate tie-aware recalls with binomial standard errors. Failed
/// trials are counted and excluded from recall denominators, never silently
/// dropped.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsReport, BenchError> {
    run_experiment_with_interrupt(config, || false)
}

/// `run_experiment` variant that checks `interrupted` between trials and
/// returns the completed portion when it fires.
pub fn run_experiment_with_interrupt<F>(
    config: &ExperimentConfig,
    interrupted: F,
) -> Result<MetricsReport, BenchError>
where
    F: Fn() -> bool + Sync,
{
    config.validate()?;
    let strengths = &config.anomaly_strengths;
    let coords: Vec<(usize, usize)> = (0..strengths.len())
        .flat_map(|si| (0..config.trials_per_point).map(move |ti| (si, ti)))
        .collect();

    let outcomes: Vec<((usize, usize), Option<Result<TrialOutcome, String>>)> = coords
        .par_iter()
        .map(|&(si, ti)| {
            if interrupted() {
                return ((si, ti), None);
            }
            ((si, ti), Some(run_trial(config, si, ti)))
        })
        .collect();

    let mut rows = Vec::new();
    let mut trial_failures = Vec::new();
    let mut trial_log: Vec<TrialLog> = Vec::new();

    for (si, &strength) in strengths.iter().enumerate() {
        let cell: Vec<&Result<TrialOutcome, String>> = outcomes
            .iter()
            .filter(|((s, _), outcome)| *s == si && outcome.is_some())
            .map(|(_, outcome)| outcome.as_ref().unwrap())
            .collect();
        let attempted = cell.len();
        let successes: Vec<&TrialOutcome> = cell.iter().filter_map(|r| r.as_ref().ok()).collect();
        trial_failures.push((strength, attempted - successes.len()));

        if config.log_trials {
            for (ti, outcome) in cell.iter().enumerate() {
                if let Ok(trial) = outcome {
                    trial_log.push(TrialLog {
                        strength,
                        trial: ti,
                        truth: trial.truth.clone(),
                        target: trial.target.clone(),
                        results: config
                            .methods
                            .iter()
                            .zip(&trial.per_method)
                            .map(|(&m, res)| match res {
                                Ok((groups, ms)) => TrialMethodLog {
                                    method: method_label(m),
                                    ranking: Some(groups.clone()),
                                    runtime_ms: *ms,
                                    error: None,
                                },
                                Err(e) => TrialMethodLog {
                                    method: method_label(m),
                                    ranking: None,
                                    runtime_ms: 0.0,
                                    error: Some(e.clone()),
                                },
                            })
                            .collect(),
                    });
                }
            }
        }

        for (mi, &method) in config.methods.iter().enumerate() {
            let mut rankings = Vec::new();
            let mut truths = Vec::new();
            let mut runtime_total = 0.0;
            let mut method_failures = attempted - successes.len();
            for trial in &successes {
                match &trial.per_method[mi] {
                    Ok((groups, ms)) => {
                        rankings.push(groups.clone());
                        truths.push(trial.truth.clone());
                        runtime_total += ms;
                    }
                    Err(_) => method_failures += 1,
                }
            }
            let trials = rankings.len();
            let mean_runtime = if trials > 0 {
                runtime_total / trials as f64
            } else {
                0.0
            };
            for k in [1usize, 3] {
                for tie_mode in [TieMode::WithTies, TieMode::RandomAmongTies] {
                    let mut tie_rng = ChaCha8Rng::seed_from_u64(derive_seed(
                        config.seed ^ 0xA5A5_5A5A_0F0F_F0F0,
                        (si * 8 + mi) as u64,
                        (k * 2 + matches!(tie_mode, TieMode::WithTies) as usize) as u64,
                    ));
                    let recall = if trials > 0 {
                        topk_recall(&rankings, &truths, k, tie_mode, &mut tie_rng)?
                    } else {
                        0.0
                    };
                    let stderr = if trials > 0 {
                        (recall * (1.0 - recall) / trials as f64).sqrt()
                    } else {
                        0.0
                    };
                    rows.push(MetricRow {
                        method: method_label(method),
                        strength,
                        k,
                        tie_mode: tie_mode.as_str().to_string(),
                        recall,
                        stderr,
                        mean_runtime_ms: mean_runtime,
                        trials,
                        failures: method_failures,
                    });
                }
            }
        }
    }

    Ok(MetricsReport {
        rows,
        trial_failures,
        trial_log: config.log_trials.then_some(trial_log),
    })
}

fn method_label(m: MethodName) -> String {
    Method::from(m).as_str().to_string()
}
