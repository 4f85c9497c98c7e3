//! Causal DAG representation, structural predicates, and controlled
//! misspecification via random edits at a target structural Hamming distance.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Attempts before giving up on sampling an acyclic perturbation. Flip-heavy
/// edit splits are rejected often on dense graphs, so the budget is generous;
/// each attempt is a linear-time cycle check.
const PERTURB_MAX_RETRIES: usize = 20_000;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph contains a directed cycle")]
    Cycle,
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node name `{0}`")]
    DuplicateNode(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("target SHD {target} is infeasible for a graph with {nodes} nodes and {edges} edges")]
    InfeasibleShd {
        target: usize,
        nodes: usize,
        edges: usize,
    },
    #[error("no acyclic perturbation found after {0} attempts")]
    MaxRetries(usize),
    #[error("graphs must be defined over the same node names")]
    NodeSetMismatch,
}

/// Directed acyclic graph over named variables.
///
/// Node order is authoritative: datasets and score vectors align to it
/// column by column. The struct is immutable after construction and can be
/// shared freely across threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "DagRepr", into = "DagRepr")]
pub struct CausalDag {
    names: Vec<String>,
    index: HashMap<String, usize>,
    /// Edge list as (parent, child) index pairs, in insertion order.
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    /// Canonical topological order (smallest node index first among ready nodes).
    topo: Vec<usize>,
    /// topo_pos[i] = position of node i in `topo`.
    topo_pos: Vec<usize>,
}

/// Wire form: `{"nodes": [...], "edges": [["parent","child"], ...]}`.
#[derive(Debug, Serialize, Deserialize)]
struct DagRepr {
    nodes: Vec<String>,
    edges: Vec<(String, String)>,
}

impl From<CausalDag> for DagRepr {
    fn from(dag: CausalDag) -> Self {
        let edges = dag
            .edges
            .iter()
            .map(|&(p, c)| (dag.names[p].clone(), dag.names[c].clone()))
            .collect();
        DagRepr {
            nodes: dag.names,
            edges,
        }
    }
}

impl TryFrom<DagRepr> for CausalDag {
    type Error = GraphError;

    fn try_from(repr: DagRepr) -> Result<Self, GraphError> {
        let edges: Vec<(&str, &str)> = repr
            .edges
            .iter()
            .map(|(p, c)| (p.as_str(), c.as_str()))
            .collect();
        CausalDag::new(repr.nodes.clone(), &edges)
    }
}

impl CausalDag {
    /// Builds a validated DAG from node names and (parent, child) edges.
    ///
    /// Rejects duplicate names, unknown endpoints, duplicate edges, and any
    /// directed cycle (self-loops included).
    pub fn new<S: AsRef<str>>(nodes: Vec<String>, edges: &[(S, S)]) -> Result<Self, GraphError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, name) in nodes.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(name.clone()));
            }
        }

        let n = nodes.len();
        let mut edge_idx = Vec::with_capacity(edges.len());
        let mut seen = std::collections::HashSet::new();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for (p, c) in edges {
            let (p, c) = (p.as_ref(), c.as_ref());
            let pi = *index
                .get(p)
                .ok_or_else(|| GraphError::UnknownNode(p.to_string()))?;
            let ci = *index
                .get(c)
                .ok_or_else(|| GraphError::UnknownNode(c.to_string()))?;
            if pi == ci {
                return Err(GraphError::Cycle);
            }
            if !seen.insert((pi, ci)) {
                return Err(GraphError::DuplicateEdge(p.to_string(), c.to_string()));
            }
            edge_idx.push((pi, ci));
            parents[ci].push(pi);
            children[pi].push(ci);
        }

        let topo = toposort(n, &parents, &children).ok_or(GraphError::Cycle)?;
        let mut topo_pos = vec![0; n];
        for (pos, &node) in topo.iter().enumerate() {
            topo_pos[node] = pos;
        }

        Ok(CausalDag {
            names: nodes,
            index,
            edges: edge_idx,
            parents,
            children,
            topo,
            topo_pos,
        })
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_names(&self) -> &[String] {
        &self.names
    }

    pub fn node_name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn node_index(&self, name: &str) -> Result<usize, GraphError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    /// Edges as (parent, child) index pairs, in insertion order.
    pub fn edge_indices(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn parents_of(&self, idx: usize) -> &[usize] {
        &self.parents[idx]
    }

    pub fn children_of(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    pub fn in_degree(&self, idx: usize) -> usize {
        self.parents[idx].len()
    }

    /// Largest parent count over all nodes.
    pub fn max_in_degree(&self) -> usize {
        self.parents.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Canonical topological order; every edge goes forward in it.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    /// Position of node `idx` in the canonical topological order.
    pub fn topo_position(&self, idx: usize) -> usize {
        self.topo_pos[idx]
    }

    /// True iff the undirected skeleton is a forest: per weakly connected
    /// component the edge count equals node count minus one.
    pub fn is_polytree(&self) -> bool {
        let mut dsu = Dsu::new(self.names.len());
        for &(p, c) in &self.edges {
            if !dsu.union(p, c) {
                // Redundant union closes an undirected cycle.
                return false;
            }
        }
        true
    }

    /// Ancestor indices of `idx`, including `idx` itself, sorted ascending.
    pub fn ancestor_indices(&self, idx: usize) -> Vec<usize> {
        self.reachable(idx, &self.parents)
    }

    /// Descendant indices of `idx`, including `idx` itself, sorted ascending.
    pub fn descendant_indices(&self, idx: usize) -> Vec<usize> {
        self.reachable(idx, &self.children)
    }

    /// Named ancestor set of `node`, including the node itself.
    pub fn ancestors(&self, node: &str) -> Result<Vec<String>, GraphError> {
        let idx = self.node_index(node)?;
        Ok(self
            .ancestor_indices(idx)
            .into_iter()
            .map(|i| self.names[i].clone())
            .collect())
    }

    /// Named descendant set of `node`, including the node itself.
    pub fn descendants(&self, node: &str) -> Result<Vec<String>, GraphError> {
        let idx = self.node_index(node)?;
        Ok(self
            .descendant_indices(idx)
            .into_iter()
            .map(|i| self.names[i].clone())
            .collect())
    }

    fn reachable(&self, start: usize, step: &[Vec<usize>]) -> Vec<usize> {
        let mut visited = vec![false; self.names.len()];
        visited[start] = true;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &v in &step[u] {
                if !visited[v] {
                    visited[v] = true;
                    stack.push(v);
                }
            }
        }
        (0..self.names.len()).filter(|&i| visited[i]).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dag serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self, GraphError> {
        let repr: DagRepr = serde_json::from_str(json)
            .map_err(|e| GraphError::UnknownNode(format!("invalid graph JSON: {e}")))?;
        CausalDag::try_from(repr)
    }
}

/// Kahn's algorithm with a min-index frontier so the order is canonical.
fn toposort(n: usize, parents: &[Vec<usize>], children: &[Vec<usize>]) -> Option<Vec<usize>> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let mut in_deg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n)
        .filter(|&i| in_deg[i] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(u)) = ready.pop() {
        order.push(u);
        for &v in &children[u] {
            in_deg[v] -= 1;
            if in_deg[v] == 0 {
                ready.push(Reverse(v));
            }
        }
    }
    (order.len() == n).then_some(order)
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    /// Returns false when both nodes were already in the same component.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Structural Hamming distance between two DAGs over the same node names.
///
/// Per unordered node pair, a missing edge, an extra edge, or a reversed
/// edge each cost one.
pub fn shd(a: &CausalDag, b: &CausalDag) -> Result<usize, GraphError> {
    if a.node_count() != b.node_count() {
        return Err(GraphError::NodeSetMismatch);
    }
    // Align b's indices onto a's name order.
    let mut b_to_a = vec![0usize; b.node_count()];
    for (bi, name) in b.node_names().iter().enumerate() {
        b_to_a[bi] = a.node_index(name).map_err(|_| GraphError::NodeSetMismatch)?;
    }

    #[derive(PartialEq, Clone, Copy)]
    enum PairState {
        Fwd,
        Rev,
    }
    let classify = |edges: &[(usize, usize)]| {
        let mut m: HashMap<(usize, usize), PairState> = HashMap::new();
        for &(p, c) in edges {
            let key = (p.min(c), p.max(c));
            let state = if p < c { PairState::Fwd } else { PairState::Rev };
            m.insert(key, state);
        }
        m
    };
    let ea = classify(a.edge_indices());
    let eb_raw: Vec<(usize, usize)> = b
        .edge_indices()
        .iter()
        .map(|&(p, c)| (b_to_a[p], b_to_a[c]))
        .collect();
    let eb = classify(&eb_raw);

    let mut dist = 0;
    for (key, &sa) in &ea {
        match eb.get(key) {
            Some(&sb) if sb == sa => {}
            _ => dist += 1,
        }
    }
    for key in eb.keys() {
        if !ea.contains_key(key) {
            dist += 1;
        }
    }
    Ok(dist)
}

/// Randomly edits a DAG to sit at exactly `target_shd` structural Hamming
/// distance from the input while preserving edge density.
///
/// Equal numbers of edges are removed and added (on previously non-adjacent
/// pairs); the remaining budget is spent reversing surviving edges. The
/// combined edit is resampled until the result is acyclic.
pub fn perturb_graph<R: Rng + ?Sized>(
    dag: &CausalDag,
    target_shd: usize,
    rng: &mut R,
) -> Result<CausalDag, GraphError> {
    if target_shd == 0 {
        return Ok(dag.clone());
    }
    let n = dag.node_count();
    let e = dag.edge_count();
    let free_pairs = n * (n - 1) / 2 - e;

    // n_swap edges removed and added (2 per unit of SHD), n_flip reversed.
    // Feasibility: n_flip = target - 2*n_swap must fit in the surviving edges,
    // so n_swap >= target - e; swaps are capped by both edge count and free slots.
    let lo = target_shd.saturating_sub(e);
    let hi = (target_shd / 2).min(e).min(free_pairs);
    if lo > hi {
        return Err(GraphError::InfeasibleShd {
            target: target_shd,
            nodes: n,
            edges: e,
        });
    }

    let names = dag.node_names().to_vec();
    let adjacent: std::collections::HashSet<(usize, usize)> = dag
        .edge_indices()
        .iter()
        .map(|&(p, c)| (p.min(c), p.max(c)))
        .collect();

    for _ in 0..PERTURB_MAX_RETRIES {
        let n_swap = rng.random_range(lo..=hi);
        let n_flip = target_shd - 2 * n_swap;

        let mut edge_order: Vec<usize> = (0..e).collect();
        partial_shuffle(&mut edge_order, n_swap + n_flip, rng);
        let removed: std::collections::HashSet<usize> =
            edge_order[..n_swap].iter().copied().collect();
        let flipped: std::collections::HashSet<usize> =
            edge_order[n_swap..n_swap + n_flip].iter().copied().collect();

        // Sample additions on pairs that were non-adjacent in the input.
        let mut added: Vec<(usize, usize)> = Vec::with_capacity(n_swap);
        let mut added_pairs = std::collections::HashSet::new();
        let mut guard = 0usize;
        while added.len() < n_swap {
            guard += 1;
            if guard > 100 * (n_swap + 1) * (n + 1) {
                break; // pathological density; fall through to retry
            }
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a == b {
                continue;
            }
            let key = (a.min(b), a.max(b));
            if adjacent.contains(&key) || added_pairs.contains(&key) {
                continue;
            }
            added_pairs.insert(key);
            added.push((a, b));
        }
        if added.len() < n_swap {
            continue;
        }

        let mut new_edges: Vec<(String, String)> = Vec::with_capacity(e - n_swap + n_swap);
        for (i, &(p, c)) in dag.edge_indices().iter().enumerate() {
            if removed.contains(&i) {
                continue;
            }
            if flipped.contains(&i) {
                new_edges.push((names[c].clone(), names[p].clone()));
            } else {
                new_edges.push((names[p].clone(), names[c].clone()));
            }
        }
        for &(p, c) in &added {
            new_edges.push((names[p].clone(), names[c].clone()));
        }

        match CausalDag::new(names.clone(), &new_edges) {
            Ok(candidate) => {
                debug_assert_eq!(shd(dag, &candidate).unwrap(), target_shd);
                return Ok(candidate);
            }
            Err(GraphError::Cycle) => continue,
            Err(other) => return Err(other),
        }
    }
    Err(GraphError::MaxRetries(PERTURB_MAX_RETRIES))
}

/// Fisher-Yates over the first `k` slots only.
fn partial_shuffle<R: Rng + ?Sized>(items: &mut [usize], k: usize, rng: &mut R) {
    let len = items.len();
    for i in 0..k.min(len.saturating_sub(1)) {
        let j = rng.random_range(i..len);
        items.swap(i, j);
    }
}
