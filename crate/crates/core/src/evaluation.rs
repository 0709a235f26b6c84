//! Classification rates, confusion matrices and report rendering.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayesnet::Instance;
use crate::classifiers::{predict_batch, ClassifierError, ClassifierKind, Model, TrainedClassifier};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("nothing to evaluate: {0}")]
    Empty(String),
    #[error("{predictions} predictions for {truth} true labels")]
    Length { predictions: usize, truth: usize },
    #[error("class {class} outside [0, {class_count})")]
    Range { class: usize, class_count: usize },
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

/// Fraction of positions where prediction and truth agree.
pub fn pcc(predictions: &[usize], truth: &[usize]) -> Result<f64, EvalError> {
    if predictions.len() != truth.len() {
        return Err(EvalError::Length {
            predictions: predictions.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::Empty("no predictions".into()));
    }
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// `m[t][p]` counts instances of true class `t` predicted as `p`.
pub fn confusion(
    predictions: &[usize],
    truth: &[usize],
    class_count: usize,
) -> Result<Vec<Vec<u64>>, EvalError> {
    if predictions.len() != truth.len() {
        return Err(EvalError::Length {
            predictions: predictions.len(),
            truth: truth.len(),
        });
    }
    let mut m = vec![vec![0u64; class_count]; class_count];
    for (&p, &t) in predictions.iter().zip(truth) {
        for class in [p, t] {
            if class >= class_count {
                return Err(EvalError::Range { class, class_count });
            }
        }
        m[t][p] += 1;
    }
    Ok(m)
}

/// Diagonal over row sum; `None` for a class with no instances.
pub fn class_rates(confusion: &[Vec<u64>]) -> Vec<Option<f64>> {
    confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let total: u64 = row.iter().sum();
            (total > 0).then(|| row[c] as f64 / total as f64)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub train_seconds: f64,
    pub evaluate_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetResult {
    pub instances: usize,
    pub pcc: f64,
    pub class_rates: Vec<Option<f64>>,
    pub confusion: Vec<Vec<u64>>,
}

impl SetResult {
    fn compute(clf: &TrainedClassifier, data: &[Instance], what: &str) -> Result<Self, EvalError> {
        if data.is_empty() {
            return Err(EvalError::Empty(format!("{what} set is empty")));
        }
        let inputs: Vec<Vec<usize>> = data.iter().map(|d| d.attrs.clone()).collect();
        let predictions: Vec<usize> = predict_batch(clf, &inputs)?.into_iter().map(|(c, _)| c).collect();
        let truth: Vec<usize> = data.iter().map(|d| d.class).collect();
        let confusion = confusion(&predictions, &truth, clf.space().class_count())?;
        Ok(Self {
            instances: data.len(),
            pcc: pcc(&predictions, &truth)?,
            class_rates: class_rates(&confusion),
            confusion,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub kind: String,
    pub network: String,
    pub structure: String,
    pub threshold: Option<String>,
    pub k: usize,
    pub class_count: usize,
    pub train: SetResult,
    pub test: SetResult,
    pub structure_description: Vec<String>,
    #[serde(skip)]
    pub timings: Timings,
}

/// Rates of `clf` on its training set and on a held-out test set.
pub fn evaluate(
    clf: &TrainedClassifier,
    train: &[Instance],
    test: &[Instance],
) -> Result<EvaluationReport, EvalError> {
    let start = Instant::now();
    let train_result = SetResult::compute(clf, train, "training")?;
    let test_result = SetResult::compute(clf, test, "test")?;
    let structure = match (&clf.model, clf.kind) {
        (Model::Multi(_), _) => "Per-class structures",
        (_, ClassifierKind::NaiveBayes) => "Naive",
        _ => "Global structure",
    };
    let space = clf.space();
    Ok(EvaluationReport {
        kind: clf.kind.name().to_string(),
        network: clf.kind.label().to_string(),
        structure: structure.to_string(),
        threshold: clf.kind.threshold().map(|t| t.to_string()),
        k: space.cardinalities().iter().copied().max().unwrap_or(0),
        class_count: space.class_count(),
        train: train_result,
        test: test_result,
        structure_description: clf.structure_description().lines().map(str::to_string).collect(),
        timings: Timings {
            train_seconds: clf.meta.seconds,
            evaluate_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

impl EvaluationReport {
    /// PCC equals the confusion trace over its total, and each class rate
    /// its diagonal over its row sum, on both sets.
    pub fn is_consistent(&self) -> bool {
        [&self.train, &self.test].iter().all(|r| {
            let total: u64 = r.confusion.iter().flatten().sum();
            let trace: u64 = (0..r.confusion.len()).map(|c| r.confusion[c][c]).sum();
            total as usize == r.instances
                && r.pcc == trace as f64 / total as f64
                && r.class_rates == class_rates(&r.confusion)
        })
    }

    fn structure_label(&self) -> String {
        match &self.threshold {
            Some(t) => format!("{} (S={t})", self.structure),
            None => self.structure.clone(),
        }
    }
}

fn rate(r: Option<f64>) -> String {
    r.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

/// Pretty-printed JSON array of reports, newline terminated.
pub fn reports_to_json(reports: &[EvaluationReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
    s.push('\n');
    s
}

pub fn reports_from_json(text: &str) -> Result<Vec<EvaluationReport>, serde_json::Error> {
    serde_json::from_str(text)
}

/// Aligned table with columns Network, Structure, Class, k, Train rate and
/// Test rate; one row per class plus an overall PCC row per report.
pub fn render_table(reports: &[EvaluationReport]) -> String {
    let header = ["Network", "Structure", "Class", "k", "Train rate", "Test rate"];
    let mut rows: Vec<[String; 6]> = Vec::new();
    for r in reports {
        for c in 0..r.class_count {
            let (net, st) = if c == 0 {
                (r.network.clone(), r.structure_label())
            } else {
                (String::new(), String::new())
            };
            rows.push([
                net,
                st,
                format!("class {}", c + 1),
                r.k.to_string(),
                rate(r.train.class_rates[c]),
                rate(r.test.class_rates[c]),
            ]);
        }
        rows.push([
            String::new(),
            String::new(),
            "PCC".to_string(),
            r.k.to_string(),
            rate(Some(r.train.pcc)),
            rate(Some(r.test.pcc)),
        ]);
    }
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let mut l = String::new();
        for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
            if i > 0 {
                l.push_str("  ");
            }
            // numeric columns right-aligned
            if i >= 3 {
                let _ = write!(l, "{cell:>w$}");
            } else {
                let _ = write!(l, "{cell:<w$}");
            }
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    line(&header);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&rule.iter().map(String::as_str).collect::<Vec<_>>());
    for row in &rows {
        line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

/// The table followed by each report's learned structure.
pub fn render_text(reports: &[EvaluationReport]) -> String {
    let mut out = render_table(reports);
    for r in reports {
        let _ = writeln!(out, "\n{} structure ({}):", r.network, r.structure_label());
        for l in &r.structure_description {
            let _ = writeln!(out, "  {l}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pcc_counts() {
        assert_eq!(pcc(&[0, 1, 2], &[0, 1, 2]), Ok(1.0));
        assert_eq!(pcc(&[1, 2, 0], &[0, 1, 2]), Ok(0.0));
        let truth = [0usize; 10];
        let pred = [0, 0, 0, 0, 0, 0, 0, 1, 1, 1];
        assert_eq!(pcc(&pred, &truth), Ok(0.7));
        assert!(matches!(pcc(&[], &[]), Err(EvalError::Empty(_))));
        assert!(matches!(pcc(&[0], &[]), Err(EvalError::Length { .. })));
    }

    #[test]
    fn confusion_cells() {
        let m = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(m, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        let m = confusion(&[2], &[0], 3).unwrap();
        assert_eq!(m[0][2], 1);
        assert_eq!(m.iter().flatten().sum::<u64>(), 1);
        assert!(matches!(confusion(&[3], &[0], 3), Err(EvalError::Range { class: 3, .. })));
    }

    #[test]
    fn rates_skip_absent_classes() {
        let m = vec![vec![3, 1], vec![0, 0]];
        assert_eq!(class_rates(&m), vec![Some(0.75), None]);
        assert_eq!(rate(None), "-");
        assert_eq!(rate(Some(0.954)), "0.95");
        assert_eq!(rate(Some(1.0)), "1.00");
    }
}
