//! Discrete Bayesian-network machinery for classification: sufficient
//! statistics, parameter estimation, information measures, tree/forest
//! structure learning, factored posteriors and DAG counting.

mod counts;
mod dag;
mod estimate;
mod info;
mod model;
mod structure;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use counts::{count_tables, CountTable, Counts};
pub use dag::robinson_dag_count;
pub use estimate::{
    laplace, laplace_class_prior, laplace_cond, laplace_cond_for_class, laplace_prior_ratio,
    map_estimate, ml_estimate, Cpt, DirichletPrior, ProbTable,
};
pub use info::{conditional_mutual_information, mutual_information, root_scores, CmiMatrix};
pub use model::{map_decision, posterior, BnModel, ClassNet, MultiNetModel};
pub use structure::{average_cmi, chow_liu_tan, fan_structure, Structure, ThresholdMode};

#[derive(Debug, Error, PartialEq)]
pub enum BayesError {
    #[error("value out of range: {0}")]
    Range(String),
    #[error("invalid attribute space: {0}")]
    Space(String),
    #[error("parent configuration {config} was never observed")]
    ZeroConfig { config: usize },
    #[error("invalid Dirichlet prior: {0}")]
    Alpha(String),
    #[error("no data")]
    EmptyData,
    #[error("invalid structure: {0}")]
    Structure(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("model file: {0}")]
    Parse(String),
}

/// Attribute cardinalities and the number of classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpace {
    cardinalities: Vec<usize>,
    class_count: usize,
}

impl AttributeSpace {
    /// Requires at least one attribute, every cardinality ≥ 2 and at least
    /// one class.
    pub fn new(cardinalities: Vec<usize>, class_count: usize) -> Result<Self, BayesError> {
        if cardinalities.is_empty() {
            return Err(BayesError::Space("no attributes".into()));
        }
        if let Some(i) = cardinalities.iter().position(|&v| v < 2) {
            return Err(BayesError::Space(format!(
                "attribute {i} has cardinality {}, need at least 2",
                cardinalities[i]
            )));
        }
        if class_count == 0 {
            return Err(BayesError::Space("no classes".into()));
        }
        Ok(Self {
            cardinalities,
            class_count,
        })
    }

    pub fn uniform(n: usize, k: usize, class_count: usize) -> Result<Self, BayesError> {
        Self::new(vec![k; n], class_count)
    }

    pub fn n(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn cardinality(&self, i: usize) -> usize {
        self.cardinalities[i]
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn check(&self, attrs: &[usize]) -> Result<(), BayesError> {
        if attrs.len() != self.n() {
            return Err(BayesError::Range(format!(
                "{} attribute values for {} attributes",
                attrs.len(),
                self.n()
            )));
        }
        for (i, (&a, &v)) in attrs.iter().zip(&self.cardinalities).enumerate() {
            if a >= v {
                return Err(BayesError::Range(format!(
                    "attribute {i} has value {a}, cardinality {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn check_class(&self, class: usize) -> Result<(), BayesError> {
        if class >= self.class_count {
            return Err(BayesError::Range(format!(
                "class {class} outside [0, {})",
                self.class_count
            )));
        }
        Ok(())
    }
}

/// One labeled training or test record.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instance {
    pub attrs: Vec<usize>,
    pub class: usize,
}

impl Instance {
    pub fn new(attrs: Vec<usize>, class: usize) -> Self {
        Self { attrs, class }
    }
}
