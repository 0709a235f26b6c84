//! The five classifier variants built on [`crate::bayesnet`]: naive Bayes,
//! TAN and FAN with one global structure, and TAN and FAN multinets with a
//! structure per class.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::bayesnet::{
    chow_liu_tan, count_tables, fan_structure, map_decision, root_scores, AttributeSpace,
    BayesError, BnModel, CmiMatrix, Instance, MultiNetModel, Structure, ThresholdMode,
};
use crate::textio::LineReader;

const CLASSIFIER_MAGIC: &str = "facebn-classifier v1";

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error("training data: {0}")]
    Data(String),
    #[error(transparent)]
    Bayes(#[from] BayesError),
    #[error("classifier file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassifierKind {
    NaiveBayes,
    GlobalTan,
    GlobalFan(ThresholdMode),
    TanPerClass,
    FanPerClass(ThresholdMode),
}

impl ClassifierKind {
    /// Short CLI name: `nb`, `gtan`, `gfan`, `tan`, `fan`.
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierKind::NaiveBayes => "nb",
            ClassifierKind::GlobalTan => "gtan",
            ClassifierKind::GlobalFan(_) => "gfan",
            ClassifierKind::TanPerClass => "tan",
            ClassifierKind::FanPerClass(_) => "fan",
        }
    }

    /// Network label used in rendered tables.
    pub fn label(&self) -> &'static str {
        match self {
            ClassifierKind::NaiveBayes => "NB",
            ClassifierKind::GlobalTan => "GTAN",
            ClassifierKind::GlobalFan(_) => "GFAN",
            ClassifierKind::TanPerClass => "TAN",
            ClassifierKind::FanPerClass(_) => "FAN",
        }
    }

    pub fn threshold(&self) -> Option<ThresholdMode> {
        match self {
            ClassifierKind::GlobalFan(t) | ClassifierKind::FanPerClass(t) => Some(*t),
            _ => None,
        }
    }

    pub fn is_per_class(&self) -> bool {
        matches!(self, ClassifierKind::TanPerClass | ClassifierKind::FanPerClass(_))
    }

    /// `threshold` is used by the FAN variants only.
    pub fn parse(name: &str, threshold: ThresholdMode) -> Result<Self, String> {
        Ok(match name.trim().to_ascii_lowercase().as_str() {
            "nb" => ClassifierKind::NaiveBayes,
            "gtan" => ClassifierKind::GlobalTan,
            "gfan" => ClassifierKind::GlobalFan(threshold),
            "tan" => ClassifierKind::TanPerClass,
            "fan" => ClassifierKind::FanPerClass(threshold),
            other => return Err(format!("unknown classifier kind {other:?}")),
        })
    }

    pub fn all(threshold: ThresholdMode) -> [ClassifierKind; 5] {
        [
            ClassifierKind::NaiveBayes,
            ClassifierKind::GlobalTan,
            ClassifierKind::GlobalFan(threshold),
            ClassifierKind::TanPerClass,
            ClassifierKind::FanPerClass(threshold),
        ]
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.threshold() {
            Some(t) => write!(f, "{} (threshold {t})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    /// `name` or `name:threshold`, e.g. `gfan:avg`, `fan:0.8`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some((name, t)) => Self::parse(name, t.parse()?),
            None => Self::parse(s, ThresholdMode::Average),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Single(BnModel),
    Multi(MultiNetModel),
}

impl Model {
    pub fn space(&self) -> &AttributeSpace {
        match self {
            Model::Single(m) => m.space(),
            Model::Multi(m) => m.space(),
        }
    }

    pub fn posterior(&self, attrs: &[usize]) -> Result<Vec<f64>, BayesError> {
        match self {
            Model::Single(m) => m.posterior(attrs),
            Model::Multi(m) => m.posterior(attrs),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub instances: usize,
    pub class_counts: Vec<u64>,
    /// Wall time of training; not persisted.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    pub kind: ClassifierKind,
    pub model: Model,
    pub meta: TrainingMeta,
}

fn learn_structure(
    kind: ClassifierKind,
    data: &[Instance],
    space: &AttributeSpace,
    scores: &[f64],
) -> Result<Structure, BayesError> {
    let counts = count_tables(data, space)?;
    let cmi = CmiMatrix::from_counts(&counts)?;
    Ok(match kind.threshold() {
        Some(t) => fan_structure(&cmi, scores, t),
        None => chow_liu_tan(&cmi, scores),
    })
}

/// Fits one classifier variant. Structures of the global variants come from
/// the pooled data; per-class structures from each class's instances only.
/// Root scores `I(A_i; C)` always use the pooled data, and all parameters
/// are add-one smoothed.
pub fn train(
    kind: ClassifierKind,
    data: &[Instance],
    space: &AttributeSpace,
) -> Result<TrainedClassifier, ClassifierError> {
    let start = Instant::now();
    let counts = count_tables(data, space)?;
    if let Some(c) = counts.class_counts().iter().position(|&n| n == 0) {
        return Err(ClassifierError::Data(format!("class {c} has no training instances")));
    }
    let n = space.n();
    let model = match kind {
        ClassifierKind::NaiveBayes => Model::Single(BnModel::fit_laplace(&counts, Structure::naive(n))?),
        ClassifierKind::GlobalTan | ClassifierKind::GlobalFan(_) => {
            let scores = root_scores(&counts)?;
            let structure = learn_structure(kind, data, space, &scores)?;
            Model::Single(BnModel::fit_laplace(&counts, structure)?)
        }
        ClassifierKind::TanPerClass | ClassifierKind::FanPerClass(_) => {
            let scores = root_scores(&counts)?;
            let structures = (0..space.class_count())
                .into_par_iter()
                .map(|c| {
                    let own: Vec<Instance> = data.iter().filter(|d| d.class == c).cloned().collect();
                    learn_structure(kind, &own, space, &scores)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Model::Multi(MultiNetModel::fit_laplace(&counts, structures)?)
        }
    };
    Ok(TrainedClassifier {
        kind,
        model,
        meta: TrainingMeta {
            instances: data.len(),
            class_counts: counts.class_counts().to_vec(),
            seconds: start.elapsed().as_secs_f64(),
        },
    })
}

/// MAP class and the full posterior.
pub fn classify(clf: &TrainedClassifier, attrs: &[usize]) -> Result<(usize, Vec<f64>), ClassifierError> {
    let post = clf.model.posterior(attrs)?;
    Ok((map_decision(&post), post))
}

pub fn predict_batch(
    clf: &TrainedClassifier,
    instances: &[Vec<usize>],
) -> Result<Vec<(usize, Vec<f64>)>, ClassifierError> {
    instances.par_iter().map(|a| classify(clf, a)).collect()
}

impl TrainedClassifier {
    pub fn space(&self) -> &AttributeSpace {
        self.model.space()
    }

    /// Human-readable `attr -> parent` listing, one block per network.
    pub fn structure_description(&self) -> String {
        match &self.model {
            Model::Single(m) => m.structure().describe(),
            Model::Multi(m) => {
                let mut out = String::new();
                for (c, net) in m.nets().iter().enumerate() {
                    let _ = writeln!(out, "class {}:", c + 1);
                    for line in net.structure.describe().lines() {
                        let _ = writeln!(out, "  {line}");
                    }
                }
                out
            }
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{CLASSIFIER_MAGIC}");
        let _ = writeln!(out, "kind {}", self.kind.name());
        let _ = writeln!(
            out,
            "threshold {}",
            self.kind.threshold().map_or_else(|| "-".to_string(), |t| t.to_string())
        );
        let _ = writeln!(out, "instances {}", self.meta.instances);
        let counts: Vec<String> = self.meta.class_counts.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "class-counts {}", counts.join(" "));
        match &self.model {
            Model::Single(m) => m.write_text(&mut out),
            Model::Multi(m) => m.write_text(&mut out),
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ClassifierError> {
        let mut r = LineReader::new(text);
        let parse = |r: &mut LineReader<'_>| -> Result<_, String> {
            let (_, magic) = r.next_line()?;
            if magic != CLASSIFIER_MAGIC {
                return Err(format!("unsupported header {magic:?}"));
            }
            let name: String = r.single("kind")?;
            let threshold: String = r.single("threshold")?;
            let threshold = if threshold == "-" {
                ThresholdMode::Average
            } else {
                threshold.parse()?
            };
            let kind = ClassifierKind::parse(&name, threshold)?;
            let instances: usize = r.single("instances")?;
            let class_counts: Vec<u64> = r.parsed("class-counts")?;
            Ok((kind, instances, class_counts))
        };
        let (kind, instances, class_counts) = parse(&mut r).map_err(ClassifierError::Parse)?;
        let model = if kind.is_per_class() {
            Model::Multi(MultiNetModel::read_text(&mut r)?)
        } else {
            Model::Single(BnModel::read_text(&mut r)?)
        };
        if !r.is_done() {
            return Err(ClassifierError::Parse("trailing content".into()));
        }
        Ok(Self {
            kind,
            model,
            meta: TrainingMeta {
                instances,
                class_counts,
                seconds: 0.0,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Instance>, AttributeSpace) {
        let space = AttributeSpace::uniform(2, 2, 2).unwrap();
        let data = vec![
            Instance::new(vec![0, 0], 0),
            Instance::new(vec![0, 1], 0),
            Instance::new(vec![0, 0], 0),
            Instance::new(vec![1, 1], 1),
            Instance::new(vec![1, 0], 1),
        ];
        (data, space)
    }

    #[test]
    fn naive_bayes_has_no_arcs() {
        let (data, space) = toy();
        let clf = train(ClassifierKind::NaiveBayes, &data, &space).unwrap();
        match &clf.model {
            Model::Single(m) => assert_eq!(m.structure().arc_count(), 0),
            Model::Multi(_) => panic!("NB is a single network"),
        }
    }

    #[test]
    fn naive_bayes_matches_hand_product() {
        let (data, space) = toy();
        let clf = train(ClassifierKind::NaiveBayes, &data, &space).unwrap();
        // N = 5, N(0) = 3, N(1) = 2; instance (0, 1)
        // class 0: 4/7 * (3+1)/(3+2) * (1+1)/(3+2)
        // class 1: 3/7 * (0+1)/(2+2) * (1+1)/(2+2)
        let s0 = 4.0 / 7.0 * 4.0 / 5.0 * 2.0 / 5.0;
        let s1 = 3.0 / 7.0 * 1.0 / 4.0 * 2.0 / 4.0;
        let (class, post) = classify(&clf, &[0, 1]).unwrap();
        assert_eq!(class, 0);
        assert!((post[0] - s0 / (s0 + s1)).abs() < 1e-12);
    }

    #[test]
    fn empty_class_is_rejected() {
        let space = AttributeSpace::uniform(2, 2, 3).unwrap();
        let (data, _) = toy();
        assert!(matches!(
            train(ClassifierKind::GlobalTan, &data, &space),
            Err(ClassifierError::Data(_))
        ));
    }

    #[test]
    fn single_class_dataset() {
        let space = AttributeSpace::uniform(3, 4, 1).unwrap();
        let data: Vec<_> = (0..120).map(|i| Instance::new(vec![i % 4, (i / 4) % 4, 1], 0)).collect();
        for kind in ClassifierKind::all(ThresholdMode::Average) {
            let clf = train(kind, &data, &space).unwrap();
            let (c, post) = classify(&clf, &data[7].attrs).unwrap();
            assert_eq!(c, 0);
            assert!(post[0] >= 0.99);
        }
    }

    #[test]
    fn batch_matches_single_calls() {
        let (data, space) = toy();
        let clf = train(ClassifierKind::FanPerClass(ThresholdMode::Average), &data, &space).unwrap();
        assert!(predict_batch(&clf, &[]).unwrap().is_empty());
        let inputs: Vec<Vec<usize>> = data.iter().map(|d| d.attrs.clone()).collect();
        let batch = predict_batch(&clf, &inputs).unwrap();
        for (a, b) in inputs.iter().zip(&batch) {
            assert_eq!(&classify(&clf, a).unwrap(), b);
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("nb".parse::<ClassifierKind>(), Ok(ClassifierKind::NaiveBayes));
        assert_eq!(
            "fan:0.8".parse::<ClassifierKind>(),
            Ok(ClassifierKind::FanPerClass(ThresholdMode::Fixed(0.8)))
        );
        assert_eq!(
            ClassifierKind::parse("GFAN", ThresholdMode::Average),
            Ok(ClassifierKind::GlobalFan(ThresholdMode::Average))
        );
        assert!("svm".parse::<ClassifierKind>().is_err());
    }

    #[test]
    fn text_round_trip() {
        let (data, space) = toy();
        for kind in ClassifierKind::all(ThresholdMode::Fixed(0.01)) {
            let clf = train(kind, &data, &space).unwrap();
            let back = TrainedClassifier::from_text(&clf.to_text()).unwrap();
            assert_eq!(back.kind, clf.kind);
            assert_eq!(back.model, clf.model);
            assert_eq!(back.meta.class_counts, clf.meta.class_counts);
        }
        assert!(TrainedClassifier::from_text("facebn-classifier v9\n").is_err());
    }
}
