//! Structural causal model simulation: random model generation, forward
//! sampling, anomaly injection, and a Monte Carlo oracle for conditional
//! anomaly scores.

mod linear;

pub use linear::{cholesky_source_matrix, score_inversion_report, LinearScm, ScoreInversionReport};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CausalDag, GraphError};
use crate::scoring::{FeatureMap, ScoreError};

#[derive(Debug, Error)]
pub enum ScmError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("mechanism arity mismatch at node `{node}`: {actual} coefficients for {expected} parents")]
    ArityMismatch {
        node: String,
        expected: usize,
        actual: usize,
    },
    #[error("linear system is singular")]
    Singularity,
    #[error("degenerate matrix: zero diagonal entry at row {0}")]
    Degenerate(usize),
}

/// Additive noise attached to a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Gaussian { std: f64 },
    Uniform { low: f64, high: f64 },
    /// Equal-weight two-component mixture with means at `±offset`.
    GaussianMixture { offset: f64, std: f64 },
}

impl NoiseSpec {
    pub fn standard_gaussian() -> Self {
        NoiseSpec::Gaussian { std: 1.0 }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseSpec::Gaussian { std } => std * rng.sample::<f64, _>(StandardNormal),
            NoiseSpec::Uniform { low, high } => rng.random_range(low..high),
            NoiseSpec::GaussianMixture { offset, std } => {
                let mean = if rng.random_bool(0.5) { offset } else { -offset };
                mean + std * rng.sample::<f64, _>(StandardNormal)
            }
        }
    }

    /// Analytic standard deviation of the noise distribution.
    pub fn std(&self) -> f64 {
        match *self {
            NoiseSpec::Gaussian { std } => std,
            NoiseSpec::Uniform { low, high } => (high - low) / 12.0_f64.sqrt(),
            NoiseSpec::GaussianMixture { offset, std } => (std * std + offset * offset).sqrt(),
        }
    }

    fn validate(&self) -> Result<(), ScmError> {
        let ok = match *self {
            NoiseSpec::Gaussian { std } => std > 0.0 && std.is_finite(),
            NoiseSpec::Uniform { low, high } => low < high && low.is_finite() && high.is_finite(),
            NoiseSpec::GaussianMixture { offset, std } => {
                std > 0.0 && offset.is_finite() && std.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(ScmError::Config(format!("invalid noise spec {self:?}")))
        }
    }
}

/// Deterministic part of a node's structural equation; noise is added on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mechanism {
    /// Weighted sum of the parents, zero intercept.
    Linear { coeffs: Vec<f64> },
    /// One hidden layer with tanh activation, linear output.
    Mlp {
        w_hidden: Vec<Vec<f64>>,
        b_hidden: Vec<f64>,
        w_out: Vec<f64>,
        b_out: f64,
    },
}

impl Mechanism {
    pub fn arity(&self) -> usize {
        match self {
            Mechanism::Linear { coeffs } => coeffs.len(),
            Mechanism::Mlp { w_hidden, .. } => w_hidden.first().map_or(0, Vec::len),
        }
    }

    pub fn eval(&self, parents: &[f64]) -> f64 {
        match self {
            Mechanism::Linear { coeffs } => {
                coeffs.iter().zip(parents).map(|(c, p)| c * p).sum()
            }
            Mechanism::Mlp {
                w_hidden,
                b_hidden,
                w_out,
                b_out,
            } => {
                let mut out = *b_out;
                for ((weights, bias), w) in w_hidden.iter().zip(b_hidden).zip(w_out) {
                    let pre: f64 =
                        weights.iter().zip(parents).map(|(a, p)| a * p).sum::<f64>() + bias;
                    out += w * pre.tanh();
                }
                out
            }
        }
    }
}

/// Structural equation for one node: optional mechanism over the parents
/// (roots have none) plus additive noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeModel {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mechanism: Option<Mechanism>,
    pub noise: NoiseSpec,
}

/// How the injected shift is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InjectionMode {
    /// Multiples of the variable's marginal standard deviation, estimated
    /// from the normal sample. The default.
    #[default]
    MarginalStd,
    /// Multiples of the node's own noise standard deviation.
    NoiseStd,
}

/// A generative model over a causal DAG. Immutable after construction;
/// sampling goes through caller-supplied random streams.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ScmRepr", into = "ScmRepr")]
pub struct Scm {
    dag: CausalDag,
    nodes: Vec<NodeModel>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScmRepr {
    dag: CausalDag,
    nodes: Vec<NodeModel>,
}

impl From<Scm> for ScmRepr {
    fn from(scm: Scm) -> Self {
        ScmRepr {
            dag: scm.dag,
            nodes: scm.nodes,
        }
    }
}

impl TryFrom<ScmRepr> for Scm {
    type Error = ScmError;

    fn try_from(repr: ScmRepr) -> Result<Self, ScmError> {
        Scm::new(repr.dag, repr.nodes)
    }
}

impl Scm {
    pub fn new(dag: CausalDag, nodes: Vec<NodeModel>) -> Result<Self, ScmError> {
        if nodes.len() != dag.node_count() {
            return Err(ScmError::Config(format!(
                "{} node models for {} graph nodes",
                nodes.len(),
                dag.node_count()
            )));
        }
        for (i, model) in nodes.iter().enumerate() {
            model.noise.validate()?;
            let expected = dag.in_degree(i);
            match &model.mechanism {
                None if expected == 0 => {}
                None => {
                    return Err(ScmError::ArityMismatch {
                        node: dag.node_name(i).to_string(),
                        expected,
                        actual: 0,
                    })
                }
                Some(mech) if mech.arity() == expected => {}
                Some(mech) => {
                    return Err(ScmError::ArityMismatch {
                        node: dag.node_name(i).to_string(),
                        expected,
                        actual: mech.arity(),
                    })
                }
            }
        }
        Ok(Scm { dag, nodes })
    }

    pub fn dag(&self) -> &CausalDag {
        &self.dag
    }

    pub fn node_models(&self) -> &[NodeModel] {
        &self.nodes
    }

    /// One forward sample: draw every noise, then evaluate mechanisms in
    /// topological order.
    pub fn sample_row<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample_row_shifted(usize::MAX, 0.0, rng)
    }

    fn sample_row_shifted<R: Rng + ?Sized>(
        &self,
        shifted_node: usize,
        shift: f64,
        rng: &mut R,
    ) -> Vec<f64> {
        let n = self.dag.node_count();
        let mut values = vec![0.0; n];
        for &i in self.dag.topological_order() {
            let mut noise = self.nodes[i].noise.sample(rng);
            if i == shifted_node {
                noise += shift;
            }
            values[i] = match &self.nodes[i].mechanism {
                None => noise,
                Some(mech) => {
                    let parent_values: Vec<f64> = self
                        .dag
                        .parents_of(i)
                        .iter()
                        .map(|&p| values[p])
                        .collect();
                    mech.eval(&parent_values) + noise
                }
            };
        }
        values
    }

    /// Draws `count` rows from the normal regime.
    pub fn sample_normal<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..count).map(|_| self.sample_row(rng)).collect()
    }

    /// Draws one anomalous row by adding `strength` times the root cause's
    /// marginal standard deviation to its noise term and propagating.
    pub fn inject_anomaly<R: Rng + ?Sized>(
        &self,
        root_cause: &str,
        strength: f64,
        marginal_std: &[f64],
        rng: &mut R,
    ) -> Result<Vec<f64>, ScmError> {
        self.inject_anomaly_with(root_cause, strength, marginal_std, InjectionMode::MarginalStd, rng)
    }

    pub fn inject_anomaly_with<R: Rng + ?Sized>(
        &self,
        root_cause: &str,
        strength: f64,
        marginal_std: &[f64],
        mode: InjectionMode,
        rng: &mut R,
    ) -> Result<Vec<f64>, ScmError> {
        let idx = self.dag.node_index(root_cause)?;
        let scale = match mode {
            InjectionMode::MarginalStd => {
                if marginal_std.len() != self.dag.node_count() {
                    return Err(ScmError::Config(format!(
                        "{} marginal stds for {} nodes",
                        marginal_std.len(),
                        self.dag.node_count()
                    )));
                }
                marginal_std[idx]
            }
            InjectionMode::NoiseStd => self.nodes[idx].noise.std(),
        };
        Ok(self.sample_row_shifted(idx, strength * scale, rng))
    }

    /// Monte Carlo estimate of the conditional anomaly score of `observed`
    /// at `node` given its parents: the node's noise is resampled with the
    /// parents clamped and exceedances of the feature value are counted.
    /// Capped at `ln(mc_samples)`.
    pub fn conditional_score_oracle<R: Rng + ?Sized>(
        &self,
        node: &str,
        parent_values: &[f64],
        observed: f64,
        feature: &FeatureMap,
        mc_samples: usize,
        rng: &mut R,
    ) -> Result<f64, ScmError> {
        if mc_samples < 1000 {
            return Err(ScmError::Config(format!(
                "conditional score oracle needs at least 1000 samples, got {mc_samples}"
            )));
        }
        let idx = self.dag.node_index(node)?;
        let expected = self.dag.in_degree(idx);
        if parent_values.len() != expected {
            return Err(ScmError::Config(format!(
                "{} parent values for in-degree {expected}",
                parent_values.len()
            )));
        }
        if !feature.is_calibrated() {
            return Err(ScmError::Score(ScoreError::UncalibratedFeature));
        }
        let base = match &self.nodes[idx].mechanism {
            None => 0.0,
            Some(mech) => mech.eval(parent_values),
        };
        let t_obs = feature.apply(observed);
        let noise = &self.nodes[idx].noise;
        let exceed = (0..mc_samples)
            .filter(|_| feature.apply(base + noise.sample(rng)) >= t_obs)
            .count();
        Ok(if exceed == 0 {
            (mc_samples as f64).ln()
        } else {
            (mc_samples as f64 / exceed as f64).ln()
        })
    }
}

/// Configuration for random model generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScmConfig {
    pub n_nodes: usize,
    /// Restrict the sampled graph so its skeleton is a forest.
    #[serde(default)]
    pub polytree: bool,
    /// Fraction of nodes declared roots, sampled uniformly in this range.
    #[serde(default = "default_root_fraction")]
    pub root_fraction: (f64, f64),
    /// Probability that a non-root mechanism is linear rather than an MLP.
    #[serde(default = "default_linear_probability")]
    pub linear_probability: f64,
    /// Range for linear coefficients. Restricting it to positive values
    /// yields monotone mechanisms.
    #[serde(default = "default_linear_coeff_range")]
    pub linear_coeff_range: (f64, f64),
    /// Hidden layer width range for MLP mechanisms.
    #[serde(default = "default_hidden_range")]
    pub hidden_range: (usize, usize),
    /// Range for MLP weights and biases.
    #[serde(default = "default_param_range")]
    pub param_range: (f64, f64),
    /// Success probability of the truncated geometric parent-count draw;
    /// larger values favour fewer parents.
    #[serde(default = "default_parent_geometric_p")]
    pub parent_geometric_p: f64,
}

fn default_root_fraction() -> (f64, f64) {
    (0.2, 0.4)
}
fn default_linear_probability() -> f64 {
    0.2
}
fn default_linear_coeff_range() -> (f64, f64) {
    (-1.0, 1.0)
}
fn default_hidden_range() -> (usize, usize) {
    (2, 100)
}
fn default_param_range() -> (f64, f64) {
    (-5.0, 5.0)
}
fn default_parent_geometric_p() -> f64 {
    0.5
}

impl ScmConfig {
    pub fn new(n_nodes: usize) -> Self {
        ScmConfig {
            n_nodes,
            polytree: false,
            root_fraction: default_root_fraction(),
            linear_probability: default_linear_probability(),
            linear_coeff_range: default_linear_coeff_range(),
            hidden_range: default_hidden_range(),
            param_range: default_param_range(),
            parent_geometric_p: default_parent_geometric_p(),
        }
    }

    /// All-linear polytree with positive coefficients: every mechanism is
    /// strictly increasing in each argument, so identity-feature scores
    /// satisfy score typicality.
    pub fn monotone_linear_polytree(n_nodes: usize) -> Self {
        ScmConfig {
            polytree: true,
            linear_probability: 1.0,
            linear_coeff_range: (0.5, 1.0),
            ..ScmConfig::new(n_nodes)
        }
    }

    fn validate(&self) -> Result<(), ScmError> {
        if self.n_nodes == 0 {
            return Err(ScmError::Config("n_nodes must be positive".into()));
        }
        let (lo, hi) = self.root_fraction;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(ScmError::Config(format!(
                "root fraction range ({lo}, {hi}) invalid"
            )));
        }
        if !(0.0..=1.0).contains(&self.linear_probability) {
            return Err(ScmError::Config(format!(
                "linear probability {} outside [0, 1]",
                self.linear_probability
            )));
        }
        if self.linear_coeff_range.0 >= self.linear_coeff_range.1 {
            return Err(ScmError::Config("empty linear coefficient range".into()));
        }
        if self.hidden_range.0 < 1 || self.hidden_range.0 > self.hidden_range.1 {
            return Err(ScmError::Config("invalid hidden width range".into()));
        }
        if self.param_range.0 >= self.param_range.1 {
            return Err(ScmError::Config("empty parameter range".into()));
        }
        if !(self.parent_geometric_p > 0.0 && self.parent_geometric_p < 1.0) {
            return Err(ScmError::Config(
                "parent geometric probability must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Geometric draw truncated at `max_value`, support starting at 1.
fn truncated_geometric<R: Rng + ?Sized>(p: f64, max_value: usize, rng: &mut R) -> usize {
    let mut d = 1;
    while d < max_value && !rng.random_bool(p) {
        d += 1;
    }
    d
}

/// Samples a random SCM: roots first, then non-roots each wired to a
/// geometric number of earlier nodes, with mechanisms and noises drawn per
/// the configuration. Nodes are named `X1..Xn` in construction order, which
/// is topological.
pub fn sample_random_scm<R: Rng + ?Sized>(
    config: &ScmConfig,
    rng: &mut R,
) -> Result<Scm, ScmError> {
    config.validate()?;
    let n = config.n_nodes;
    let root_lo = ((config.root_fraction.0 * n as f64).round() as usize).clamp(1, n);
    let root_hi = ((config.root_fraction.1 * n as f64).round() as usize).clamp(root_lo, n);
    let n_roots = rng.random_range(root_lo..=root_hi);

    let names: Vec<String> = (1..=n).map(|i| format!("X{i}")).collect();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    // Skeleton components, used only in polytree mode: component id per node.
    let mut component: Vec<usize> = (0..n).collect();

    fn find_component(component: &mut Vec<usize>, x: usize) -> usize {
        if component[x] != x {
            let root = find_component(component, component[x]);
            component[x] = root;
        }
        component[x]
    }

    for child in n_roots..n {
        let parents: Vec<usize> = if config.polytree {
            // Parents must come from distinct skeleton components so no
            // undirected cycle can form.
            let mut roots_seen: Vec<usize> = Vec::new();
            let mut reps: Vec<usize> = Vec::new();
            for cand in 0..child {
                let root = find_component(&mut component, cand);
                if !roots_seen.contains(&root) {
                    roots_seen.push(root);
                    reps.push(cand);
                }
            }
            let d = truncated_geometric(config.parent_geometric_p, roots_seen.len(), rng);
            // Choose d distinct components, then a uniform member of each.
            let mut chosen_components = Vec::with_capacity(d);
            let mut pool: Vec<usize> = (0..roots_seen.len()).collect();
            for _ in 0..d {
                let pick = rng.random_range(0..pool.len());
                chosen_components.push(pool.swap_remove(pick));
            }
            chosen_components
                .into_iter()
                .map(|slot| {
                    let root = roots_seen[slot];
                    let members: Vec<usize> = (0..child)
                        .filter(|&cand| find_component(&mut component, cand) == root)
                        .collect();
                    members[rng.random_range(0..members.len())]
                })
                .collect()
        } else {
            let d = truncated_geometric(config.parent_geometric_p, child, rng);
            let mut pool: Vec<usize> = (0..child).collect();
            let mut picks = Vec::with_capacity(d);
            for _ in 0..d {
                let pick = rng.random_range(0..pool.len());
                picks.push(pool.swap_remove(pick));
            }
            picks
        };

        for &p in &parents {
            edges.push((p, child));
            if config.polytree {
                let (rp, rc) = (
                    find_component(&mut component, p),
                    find_component(&mut component, child),
                );
                if rp != rc {
                    component[rp] = rc;
                }
            }
        }
    }

    let named_edges: Vec<(String, String)> = edges
        .iter()
        .map(|&(p, c)| (names[p].clone(), names[c].clone()))
        .collect();
    let dag = CausalDag::new(names, &named_edges)?;

    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let in_degree = dag.in_degree(i);
        let mechanism = if in_degree == 0 {
            None
        } else if rng.random_bool(config.linear_probability) {
            let (lo, hi) = config.linear_coeff_range;
            Some(Mechanism::Linear {
                coeffs: (0..in_degree).map(|_| rng.random_range(lo..hi)).collect(),
            })
        } else {
            let width = rng.random_range(config.hidden_range.0..=config.hidden_range.1);
            let (lo, hi) = config.param_range;
            Some(Mechanism::Mlp {
                w_hidden: (0..width)
                    .map(|_| (0..in_degree).map(|_| rng.random_range(lo..hi)).collect())
                    .collect(),
                b_hidden: (0..width).map(|_| rng.random_range(lo..hi)).collect(),
                w_out: (0..width).map(|_| rng.random_range(lo..hi)).collect(),
                b_out: rng.random_range(lo..hi),
            })
        };
        let noise = if in_degree == 0 {
            match rng.random_range(0..3) {
                0 => NoiseSpec::standard_gaussian(),
                1 => NoiseSpec::Uniform {
                    low: -1.0,
                    high: 1.0,
                },
                _ => NoiseSpec::GaussianMixture {
                    offset: 2.0,
                    std: 1.0,
                },
            }
        } else {
            NoiseSpec::standard_gaussian()
        };
        nodes.push(NodeModel { mechanism, noise });
    }

    Scm::new(dag, nodes)
}
