//! Linear-SCM diagnostics: the triangular source matrix that generates the
//! observations from standardized noise, and a report on how often a
//! downstream effect can out-score its root cause.

use rand::Rng;

use super::{Mechanism, Scm, ScmError};

/// Linear structural equations `X = A X + N` in causal order, with `A`
/// strictly lower triangular and independent noise.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearScm {
    coeffs: Vec<Vec<f64>>,
    noise_variances: Vec<f64>,
}

impl LinearScm {
    /// `coeffs` must be square and strictly lower triangular; noise
    /// variances must be positive.
    pub fn new(coeffs: Vec<Vec<f64>>, noise_variances: Vec<f64>) -> Result<Self, ScmError> {
        let n = coeffs.len();
        if noise_variances.len() != n {
            return Err(ScmError::Config(format!(
                "{} noise variances for {n} rows",
                noise_variances.len()
            )));
        }
        for (i, row) in coeffs.iter().enumerate() {
            if row.len() != n {
                return Err(ScmError::Config(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if j >= i && v != 0.0 {
                    return Err(ScmError::Config(format!(
                        "coefficient matrix must be strictly lower triangular, found ({i}, {j}) = {v}"
                    )));
                }
                if !v.is_finite() {
                    return Err(ScmError::Config("non-finite coefficient".into()));
                }
            }
        }
        if noise_variances.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(ScmError::Config("noise variances must be positive".into()));
        }
        Ok(LinearScm {
            coeffs,
            noise_variances,
        })
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn noise_variances(&self) -> &[f64] {
        &self.noise_variances
    }

    /// Extracts the linear system from an SCM whose mechanisms are all
    /// linear, reindexed into topological order.
    pub fn from_scm(scm: &Scm) -> Result<Self, ScmError> {
        let dag = scm.dag();
        let n = dag.node_count();
        let topo = dag.topological_order();
        let mut pos = vec![0usize; n];
        for (p, &node) in topo.iter().enumerate() {
            pos[node] = p;
        }
        let mut coeffs = vec![vec![0.0; n]; n];
        let mut variances = vec![0.0; n];
        for (i, model) in scm.node_models().iter().enumerate() {
            let row = pos[i];
            match &model.mechanism {
                None => {}
                Some(Mechanism::Linear { coeffs: c }) => {
                    for (&parent, &coeff) in dag.parents_of(i).iter().zip(c) {
                        coeffs[row][pos[parent]] = coeff;
                    }
                }
                Some(Mechanism::Mlp { .. }) => {
                    return Err(ScmError::Config(
                        "cannot linearize an SCM with MLP mechanisms".into(),
                    ))
                }
            }
            let std = model.noise.std();
            variances[row] = std * std;
        }
        LinearScm::new(coeffs, variances)
    }

    /// Random strictly lower triangular system for diagnostics.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut coeffs = vec![vec![0.0; n]; n];
        #[allow(clippy::needless_range_loop)]
        for i in 1..n {
            for j in 0..i {
                if rng.random_bool(0.5) {
                    coeffs[i][j] = rng.random_range(-1.0..1.0);
                }
            }
        }
        let variances = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
        LinearScm::new(coeffs, variances).expect("construction is valid by design")
    }

    /// Covariance of the observed variables via the causal-order recurrence,
    /// independent of the source-matrix route.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let a = &self.coeffs;
        let mut cov = vec![vec![0.0; n]; n];
        for j in 0..n {
            // Cross terms against earlier variables: noise N_j is
            // independent of everything before j.
            for i in 0..j {
                let mut c = 0.0;
                for k in 0..j {
                    if a[j][k] != 0.0 {
                        c += a[j][k] * cov[i][k];
                    }
                }
                cov[i][j] = c;
                cov[j][i] = c;
            }
            let mut var = self.noise_variances[j];
            for k in 0..j {
                if a[j][k] == 0.0 {
                    continue;
                }
                for l in 0..j {
                    if a[j][l] != 0.0 {
                        var += a[j][k] * a[j][l] * cov[k][l];
                    }
                }
            }
            cov[j][j] = var;
        }
        cov
    }
}

/// The lower-triangular source matrix `L = (I - A)^-1 diag(sigma)` mapping
/// standardized independent noise to the observations, so `L L^T` is the
/// model covariance. Solved by forward substitution; the diagonal is
/// positive by construction.
pub fn cholesky_source_matrix(model: &LinearScm) -> Result<Vec<Vec<f64>>, ScmError> {
    let n = model.dim();
    let a = model.coeffs();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            // (I - A) L = diag(sigma): row i picks up contributions from
            // earlier rows through A.
            let mut value = if i == j {
                model.noise_variances()[i].sqrt()
            } else {
                0.0
            };
            for k in j..i {
                value += a[i][k] * l[k][j];
            }
            if !value.is_finite() {
                return Err(ScmError::Singularity);
            }
            l[i][j] = value;
        }
    }
    Ok(l)
}

/// Outcome of scanning a normalized source matrix for score inversions:
/// source positions whose diagonal influence is smaller than their effect
/// on some downstream variable.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreInversionReport {
    /// Total number of inverted (source, effect) pairs.
    pub count: usize,
    /// Smallest squared diagonal after row normalization.
    pub rho: f64,
    /// Per-effect upper bound `(1 - rho) / rho` on the inversion count.
    pub bound: f64,
    /// Inverted pair count per effect row.
    pub per_node: Vec<usize>,
}

/// Normalizes the rows of a lower-triangular matrix to unit norm, then for
/// each effect row `j` counts sources `i < j` with `L[i][i]^2 < L[j][i]^2`.
/// Each such count is at most `(1 - rho) / rho` with `rho` the smallest
/// squared diagonal: an effect can only out-score sources whose diagonal
/// share is small.
pub fn score_inversion_report(l: &[Vec<f64>]) -> Result<ScoreInversionReport, ScmError> {
    let n = l.len();
    let mut normalized = Vec::with_capacity(n);
    for (i, row) in l.iter().enumerate() {
        if row.len() != n {
            return Err(ScmError::Config(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        let norm = row[..=i].iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || l[i][i] == 0.0 {
            return Err(ScmError::Degenerate(i));
        }
        let scaled: Vec<f64> = row[..=i].iter().map(|v| v / norm).collect();
        normalized.push(scaled);
    }

    let rho = (0..n)
        .map(|i| normalized[i][i] * normalized[i][i])
        .fold(f64::INFINITY, f64::min);
    let bound = (1.0 - rho) / rho;

    let mut per_node = vec![0usize; n];
    for j in 0..n {
        for i in 0..j {
            let diag_sq = normalized[i][i] * normalized[i][i];
            let effect_sq = normalized[j][i] * normalized[j][i];
            if diag_sq < effect_sq {
                per_node[j] += 1;
            }
        }
    }
    Ok(ScoreInversionReport {
        count: per_node.iter().sum(),
        rho,
        bound,
        per_node,
    })
}
