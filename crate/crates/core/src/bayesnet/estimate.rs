//! Parameter estimators for conditional probability tables.

use super::counts::{CountTable, Counts};
use super::structure::Structure;
use super::BayesError;

/// Probabilities of one variable per parent configuration, row-major
/// `[config][value]`; every row sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTable {
    pub configs: usize,
    pub values: usize,
    pub probs: Vec<f64>,
}

impl ProbTable {
    pub fn row(&self, config: usize) -> &[f64] {
        &self.probs[config * self.values..(config + 1) * self.values]
    }

    pub fn get(&self, config: usize, value: usize) -> f64 {
        self.probs[config * self.values + value]
    }
}

fn table_from(t: &CountTable, mut cell: impl FnMut(usize, usize, u64) -> f64) -> ProbTable {
    let mut probs = Vec::with_capacity(t.counts.len());
    for j in 0..t.configs {
        for (k, &n) in t.config(j).iter().enumerate() {
            probs.push(cell(j, k, n));
        }
    }
    ProbTable {
        configs: t.configs,
        values: t.values,
        probs,
    }
}

/// Add-one smoothing: `(N_jk + 1) / (N_j + r)`.
pub fn laplace(t: &CountTable) -> ProbTable {
    let totals: Vec<u64> = (0..t.configs).map(|j| t.config(j).iter().sum()).collect();
    let r = t.values as f64;
    table_from(t, |j, _, n| (n as f64 + 1.0) / (totals[j] as f64 + r))
}

/// Relative frequencies `N_jk / N_j`; fails on any unobserved configuration.
pub fn ml_estimate(t: &CountTable) -> Result<ProbTable, BayesError> {
    let totals: Vec<u64> = (0..t.configs).map(|j| t.config(j).iter().sum()).collect();
    if let Some(config) = totals.iter().position(|&n| n == 0) {
        return Err(BayesError::ZeroConfig { config });
    }
    Ok(table_from(t, |j, _, n| n as f64 / totals[j] as f64))
}

/// Dirichlet hyper-parameters for [`map_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub enum DirichletPrior {
    Uniform(f64),
    /// One value per cell, same layout as the count table.
    PerCell(Vec<f64>),
}

impl DirichletPrior {
    fn at(&self, idx: usize) -> f64 {
        match self {
            DirichletPrior::Uniform(a) => *a,
            DirichletPrior::PerCell(v) => v[idx],
        }
    }
}

/// Posterior mode under a Dirichlet prior:
/// `(N_jk + a_jk - 1) / sum_k (N_jk + a_jk - 1)`. With every `a = 1` this is
/// the ML estimate; with every `a = 2` it is add-one smoothing. Boundary
/// zeros are possible when `a = 1` meets a zero count.
pub fn map_estimate(t: &CountTable, prior: &DirichletPrior) -> Result<ProbTable, BayesError> {
    if let DirichletPrior::PerCell(v) = prior {
        if v.len() != t.counts.len() {
            return Err(BayesError::Alpha(format!(
                "{} hyper-parameters for {} cells",
                v.len(),
                t.counts.len()
            )));
        }
    }
    for idx in 0..t.counts.len() {
        let a = prior.at(idx);
        if !(a >= 1.0) || !a.is_finite() {
            return Err(BayesError::Alpha(format!("alpha {a} below 1")));
        }
    }
    let mut totals = vec![0.0; t.configs];
    for (j, total) in totals.iter_mut().enumerate() {
        for k in 0..t.values {
            let idx = j * t.values + k;
            *total += t.counts[idx] as f64 + prior.at(idx) - 1.0;
        }
        if *total <= 0.0 {
            return Err(BayesError::ZeroConfig { config: j });
        }
    }
    Ok(table_from(t, |j, k, n| {
        (n as f64 + prior.at(j * t.values + k) - 1.0) / totals[j]
    }))
}

/// `(N(c) + 1, N + C)` for every class: the exact rational form of the
/// smoothed class prior.
pub fn laplace_prior_ratio(counts: &Counts) -> Vec<(u64, u64)> {
    let den = counts.total() + counts.space().class_count() as u64;
    counts
        .class_counts()
        .iter()
        .map(|&n| (n + 1, den))
        .collect()
}

/// `P(c) = (N(c) + 1) / (N + C)`.
pub fn laplace_class_prior(counts: &Counts) -> Vec<f64> {
    laplace_prior_ratio(counts)
        .into_iter()
        .map(|(num, den)| num as f64 / den as f64)
        .collect()
}

/// Conditional table of one attribute. Configurations are indexed by the
/// class (`c`) or by class and parent value (`c * v_parent + b`); for a
/// per-class network the class dimension is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub parent: Option<usize>,
    pub table: ProbTable,
}

/// Smoothed `P(a_i | c)` or `P(a_i | a_j, c)` for every attribute under
/// `structure`.
pub fn laplace_cond(counts: &Counts, structure: &Structure) -> Vec<Cpt> {
    (0..counts.space().n())
        .map(|i| {
            let parent = structure.parent(i);
            Cpt {
                parent,
                table: laplace(&counts.family_table(i, parent)),
            }
        })
        .collect()
}

/// [`laplace_cond`] for the instances of class `c` alone.
pub fn laplace_cond_for_class(counts: &Counts, c: usize, structure: &Structure) -> Vec<Cpt> {
    (0..counts.space().n())
        .map(|i| {
            let parent = structure.parent(i);
            Cpt {
                parent,
                table: laplace(&counts.family_table_for_class(c, i, parent)),
            }
        })
        .collect()
}
