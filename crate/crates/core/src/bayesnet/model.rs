//! Fitted networks and class posteriors from the factored joint.

use std::fmt::Write as _;

use super::counts::Counts;
use super::estimate::{laplace_class_prior, laplace_cond, laplace_cond_for_class, Cpt, ProbTable};
use super::structure::Structure;
use super::{AttributeSpace, BayesError};
use crate::textio::{float_row, LineReader};

const NORMALIZATION_TOL: f64 = 1e-12;

/// One structure shared by all classes, with class-conditional tables.
#[derive(Debug, Clone, PartialEq)]
pub struct BnModel {
    space: AttributeSpace,
    structure: Structure,
    class_prior: Vec<f64>,
    cpts: Vec<Cpt>,
}

/// One network per class (a Bayesian multinet). Each class's tables are
/// indexed by the parent value only.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiNetModel {
    space: AttributeSpace,
    class_prior: Vec<f64>,
    nets: Vec<ClassNet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassNet {
    pub structure: Structure,
    pub cpts: Vec<Cpt>,
}

fn check_distribution(p: &[f64], what: &str) -> Result<(), BayesError> {
    if p.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
        return Err(BayesError::Shape(format!("{what} has an entry outside (0, 1]")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > NORMALIZATION_TOL * p.len() as f64 {
        return Err(BayesError::Shape(format!("{what} sums to {s}")));
    }
    Ok(())
}

fn check_cpts(
    space: &AttributeSpace,
    structure: &Structure,
    cpts: &[Cpt],
    with_class: bool,
) -> Result<(), BayesError> {
    if structure.n() != space.n() || cpts.len() != space.n() {
        return Err(BayesError::Shape(format!(
            "{} attributes, structure over {}, {} tables",
            space.n(),
            structure.n(),
            cpts.len()
        )));
    }
    for (i, cpt) in cpts.iter().enumerate() {
        if cpt.parent != structure.parent(i) {
            return Err(BayesError::Shape(format!("table {i} disagrees with structure")));
        }
        let per_class = cpt.parent.map_or(1, |p| space.cardinality(p));
        let configs = if with_class {
            per_class * space.class_count()
        } else {
            per_class
        };
        let t = &cpt.table;
        if t.configs != configs || t.values != space.cardinality(i) || t.probs.len() != configs * t.values {
            return Err(BayesError::Shape(format!("table {i} has the wrong shape")));
        }
        for j in 0..configs {
            check_distribution(t.row(j), &format!("table {i} row {j}"))?;
        }
    }
    Ok(())
}

impl BnModel {
    /// Validates shapes and that every distribution is strictly positive and
    /// sums to one.
    pub fn new(
        space: AttributeSpace,
        structure: Structure,
        class_prior: Vec<f64>,
        cpts: Vec<Cpt>,
    ) -> Result<Self, BayesError> {
        if class_prior.len() != space.class_count() {
            return Err(BayesError::Shape("prior length differs from class count".into()));
        }
        check_distribution(&class_prior, "class prior")?;
        check_cpts(&space, &structure, &cpts, true)?;
        Ok(Self {
            space,
            structure,
            class_prior,
            cpts,
        })
    }

    /// Smoothed parameters for `structure` from pooled counts.
    pub fn fit_laplace(counts: &Counts, structure: Structure) -> Result<Self, BayesError> {
        let cpts = laplace_cond(counts, &structure);
        Self::new(
            counts.space().clone(),
            structure,
            laplace_class_prior(counts),
            cpts,
        )
    }

    pub fn space(&self) -> &AttributeSpace {
        &self.space
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn class_prior(&self) -> &[f64] {
        &self.class_prior
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    /// `P(A_i = attrs[i] | parent value, c)`.
    pub fn cond(&self, i: usize, c: usize, attrs: &[usize]) -> f64 {
        let cpt = &self.cpts[i];
        let config = match cpt.parent {
            None => c,
            Some(p) => c * self.space.cardinality(p) + attrs[p],
        };
        cpt.table.get(config, attrs[i])
    }

    /// `ln P(c) + sum_i ln P(a_i | pa_i, c)` for every class.
    pub fn log_scores(&self, attrs: &[usize]) -> Result<Vec<f64>, BayesError> {
        self.space.check(attrs)?;
        Ok((0..self.space.class_count())
            .map(|c| {
                self.class_prior[c].ln()
                    + (0..self.space.n())
                        .map(|i| self.cond(i, c, attrs).ln())
                        .sum::<f64>()
            })
            .collect())
    }

    pub fn posterior(&self, attrs: &[usize]) -> Result<Vec<f64>, BayesError> {
        Ok(normalize_log(&self.log_scores(attrs)?))
    }
}

impl MultiNetModel {
    pub fn new(
        space: AttributeSpace,
        class_prior: Vec<f64>,
        nets: Vec<ClassNet>,
    ) -> Result<Self, BayesError> {
        if class_prior.len() != space.class_count() || nets.len() != space.class_count() {
            return Err(BayesError::Shape("one prior entry and one network per class".into()));
        }
        check_distribution(&class_prior, "class prior")?;
        for net in &nets {
            check_cpts(&space, &net.structure, &net.cpts, false)?;
        }
        Ok(Self {
            space,
            class_prior,
            nets,
        })
    }

    /// Smoothed parameters for each class's own structure, estimated from
    /// that class's counts; the class prior comes from all counts.
    pub fn fit_laplace(counts: &Counts, structures: Vec<Structure>) -> Result<Self, BayesError> {
        let nets = structures
            .into_iter()
            .enumerate()
            .map(|(c, structure)| ClassNet {
                cpts: laplace_cond_for_class(counts, c, &structure),
                structure,
            })
            .collect();
        Self::new(counts.space().clone(), laplace_class_prior(counts), nets)
    }

    pub fn space(&self) -> &AttributeSpace {
        &self.space
    }

    pub fn class_prior(&self) -> &[f64] {
        &self.class_prior
    }

    pub fn nets(&self) -> &[ClassNet] {
        &self.nets
    }

    pub fn cond(&self, c: usize, i: usize, attrs: &[usize]) -> f64 {
        let cpt = &self.nets[c].cpts[i];
        let config = cpt.parent.map_or(0, |p| attrs[p]);
        cpt.table.get(config, attrs[i])
    }

    /// `ln P(c) + sum_i ln P_c(a_i | pa_c(i))`, each class under its own
    /// structure.
    pub fn log_scores(&self, attrs: &[usize]) -> Result<Vec<f64>, BayesError> {
        self.space.check(attrs)?;
        Ok((0..self.space.class_count())
            .map(|c| {
                self.class_prior[c].ln()
                    + (0..self.space.n())
                        .map(|i| self.cond(c, i, attrs).ln())
                        .sum::<f64>()
            })
            .collect())
    }

    pub fn posterior(&self, attrs: &[usize]) -> Result<Vec<f64>, BayesError> {
        Ok(normalize_log(&self.log_scores(attrs)?))
    }
}

/// Posterior of a single-structure model; see [`BnModel::posterior`].
pub fn posterior(model: &BnModel, attrs: &[usize]) -> Result<Vec<f64>, BayesError> {
    model.posterior(attrs)
}

/// Log-sum-exp normalization.
fn normalize_log(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / z).collect()
}

/// Index of the largest entry; the lowest index wins ties.
pub fn map_decision(posterior: &[f64]) -> usize {
    let mut best = 0;
    for (c, &p) in posterior.iter().enumerate().skip(1) {
        if p > posterior[best] {
            best = c;
        }
    }
    best
}

// ---- text form -----------------------------------------------------------

fn write_parents(out: &mut String, s: &Structure) {
    let parts: Vec<String> = s
        .parents()
        .iter()
        .map(|p| p.map_or_else(|| "-".to_string(), |p| p.to_string()))
        .collect();
    let _ = writeln!(out, "parents {}", parts.join(" "));
}

fn write_cpts(out: &mut String, cpts: &[Cpt]) {
    for (i, cpt) in cpts.iter().enumerate() {
        let _ = writeln!(out, "cpt {i} {} {}", cpt.table.configs, cpt.table.values);
        for j in 0..cpt.table.configs {
            let _ = writeln!(out, "{}", float_row(cpt.table.row(j)));
        }
    }
}

fn write_space(out: &mut String, space: &AttributeSpace, prior: &[f64]) {
    let _ = writeln!(out, "classes {}", space.class_count());
    let cards: Vec<String> = space.cardinalities().iter().map(|v| v.to_string()).collect();
    let _ = writeln!(out, "cardinalities {}", cards.join(" "));
    let _ = writeln!(out, "prior {}", float_row(prior));
}

fn read_space(r: &mut LineReader<'_>) -> Result<(AttributeSpace, Vec<f64>), String> {
    let classes: usize = r.single("classes")?;
    let cards: Vec<usize> = r.parsed("cardinalities")?;
    let space = AttributeSpace::new(cards, classes).map_err(|e| e.to_string())?;
    let prior: Vec<f64> = r.parsed("prior")?;
    Ok((space, prior))
}

fn read_parents(r: &mut LineReader<'_>) -> Result<Structure, String> {
    let parents = r
        .field("parents")?
        .into_iter()
        .map(|p| {
            if p == "-" {
                Ok(None)
            } else {
                p.parse().map(Some).map_err(|_| format!("bad parent {p:?}"))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Structure::from_parents(parents).map_err(|e| e.to_string())
}

fn read_cpts(r: &mut LineReader<'_>, structure: &Structure) -> Result<Vec<Cpt>, String> {
    (0..structure.n())
        .map(|i| {
            let head: Vec<usize> = r.parsed("cpt")?;
            if head.len() != 3 || head[0] != i {
                return Err(format!("expected table header for attribute {i}"));
            }
            let (configs, values) = (head[1], head[2]);
            let mut probs = Vec::with_capacity(configs * values);
            for _ in 0..configs {
                let row = r.numbers()?;
                if row.len() != values {
                    return Err(format!("table {i}: row of {} values, expected {values}", row.len()));
                }
                probs.extend(row);
            }
            Ok(Cpt {
                parent: structure.parent(i),
                table: ProbTable {
                    configs,
                    values,
                    probs,
                },
            })
        })
        .collect()
}

impl BnModel {
    pub fn write_text(&self, out: &mut String) {
        let _ = writeln!(out, "network single");
        write_space(out, &self.space, &self.class_prior);
        write_parents(out, &self.structure);
        write_cpts(out, &self.cpts);
    }

    pub(crate) fn read_text(r: &mut LineReader<'_>) -> Result<Self, BayesError> {
        let parse = |r: &mut LineReader<'_>| -> Result<_, String> {
            let kind = r.field("network")?;
            if kind != ["single"] {
                return Err(format!("expected a single network, found {kind:?}"));
            }
            let (space, prior) = read_space(r)?;
            let structure = read_parents(r)?;
            let cpts = read_cpts(r, &structure)?;
            Ok((space, structure, prior, cpts))
        };
        let (space, structure, prior, cpts) = parse(r).map_err(BayesError::Parse)?;
        Self::new(space, structure, prior, cpts)
    }
}

impl MultiNetModel {
    pub fn write_text(&self, out: &mut String) {
        let _ = writeln!(out, "network multi");
        write_space(out, &self.space, &self.class_prior);
        for (c, net) in self.nets.iter().enumerate() {
            let _ = writeln!(out, "class {c}");
            write_parents(out, &net.structure);
            write_cpts(out, &net.cpts);
        }
    }

    pub(crate) fn read_text(r: &mut LineReader<'_>) -> Result<Self, BayesError> {
        let parse = |r: &mut LineReader<'_>| -> Result<_, String> {
            let kind = r.field("network")?;
            if kind != ["multi"] {
                return Err(format!("expected a multinet, found {kind:?}"));
            }
            let (space, prior) = read_space(r)?;
            let mut nets = Vec::new();
            for c in 0..space.class_count() {
                let idx: usize = r.single("class")?;
                if idx != c {
                    return Err(format!("expected network of class {c}, found {idx}"));
                }
                let structure = read_parents(r)?;
                let cpts = read_cpts(r, &structure)?;
                nets.push(ClassNet { structure, cpts });
            }
            Ok((space, prior, nets))
        };
        let (space, prior, nets) = parse(r).map_err(BayesError::Parse)?;
        Self::new(space, prior, nets)
    }
}
