//! Empirical (maximum-likelihood) information measures, in nats.

use super::counts::Counts;
use super::BayesError;

/// Anything down to this far below zero is float noise and clipped.
const NEGATIVE_SLACK: f64 = -1e-12;

fn clip(v: f64) -> f64 {
    debug_assert!(v >= NEGATIVE_SLACK * 1e3, "information measure {v} is negative");
    v.max(0.0)
}

/// `I(A_i; C)` from the empirical joint of attribute `i` and the class.
pub fn mutual_information(counts: &Counts, i: usize) -> Result<f64, BayesError> {
    let n = counts.total();
    if n == 0 {
        return Err(BayesError::EmptyData);
    }
    let space = counts.space();
    let vi = space.cardinality(i);
    let classes = space.class_count();
    let marginal: Vec<u64> = (0..vi)
        .map(|a| (0..classes).map(|c| counts.single(c, i, a)).sum())
        .collect();
    let n = n as f64;
    let mut mi = 0.0;
    for c in 0..classes {
        let nc = counts.class(c) as f64;
        for (a, &na) in marginal.iter().enumerate() {
            let nac = counts.single(c, i, a);
            if nac == 0 {
                continue;
            }
            let nac = nac as f64;
            mi += nac / n * (nac * n / (na as f64 * nc)).ln();
        }
    }
    Ok(clip(mi))
}

/// `I(A_i; A_j | C)` from empirical frequencies, symmetric in `i`, `j`.
pub fn conditional_mutual_information(
    counts: &Counts,
    i: usize,
    j: usize,
) -> Result<f64, BayesError> {
    if i == j {
        return Err(BayesError::Range(format!(
            "conditional mutual information needs two attributes, got {i} twice"
        )));
    }
    let n = counts.total();
    if n == 0 {
        return Err(BayesError::EmptyData);
    }
    let n = n as f64;
    let space = counts.space();
    let (vi, vj) = (space.cardinality(i), space.cardinality(j));
    let mut cmi = 0.0;
    for c in 0..space.class_count() {
        let nc = counts.class(c);
        if nc == 0 {
            continue;
        }
        let nc = nc as f64;
        for a in 0..vi {
            let na = counts.single(c, i, a);
            if na == 0 {
                continue;
            }
            for b in 0..vj {
                let nab = counts.pair(c, i, a, j, b);
                if nab == 0 {
                    continue;
                }
                let nab = nab as f64;
                let nb = counts.single(c, j, b) as f64;
                cmi += nab / n * (nab * nc / (na as f64 * nb)).ln();
            }
        }
    }
    Ok(clip(cmi))
}

/// Symmetric matrix of pairwise conditional mutual information with a zero
/// diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CmiMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CmiMatrix {
    pub fn from_counts(counts: &Counts) -> Result<Self, BayesError> {
        let n = counts.space().n();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = conditional_mutual_information(counts, i, j)?;
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Ok(Self { n, values })
    }

    /// Builds a matrix from explicit weights. The input must be square and
    /// symmetric; the diagonal is ignored and negatives are rejected.
    pub fn from_weights(n: usize, weights: &[f64]) -> Result<Self, BayesError> {
        if weights.len() != n * n {
            return Err(BayesError::Shape(format!("{} weights for {n}x{n}", weights.len())));
        }
        let mut values = weights.to_vec();
        for i in 0..n {
            values[i * n + i] = 0.0;
            for j in 0..n {
                let w = values[i * n + j];
                if w.is_nan() || w < 0.0 {
                    return Err(BayesError::Shape(format!("weight ({i},{j}) = {w}")));
                }
                if w != values[j * n + i] {
                    return Err(BayesError::Shape(format!("weights not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { n, values })
    }

    /// Convenience for tests and examples: weights on the listed undirected
    /// edges, zero elsewhere.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, BayesError> {
        let mut w = vec![0.0; n * n];
        for &(i, j, v) in edges {
            if i >= n || j >= n {
                return Err(BayesError::Range(format!("edge ({i},{j}) outside {n} nodes")));
            }
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
        Self::from_weights(n, &w)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// `I(A_i; C)` for every attribute.
pub fn root_scores(counts: &Counts) -> Result<Vec<f64>, BayesError> {
    (0..counts.space().n())
        .map(|i| mutual_information(counts, i))
        .collect()
}
