//! End-to-end orchestration: configuration, stage functions that read and
//! write the persisted intermediates, and [`run_pipeline`].

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::bayesnet::{AttributeSpace, BayesError, Instance, ThresholdMode};
use crate::classifiers::{train, ClassifierError, ClassifierKind, TrainedClassifier};
use crate::evaluation::{evaluate, render_text, reports_to_json, EvalError, EvaluationReport};
use crate::features::{csv_rows, describe_image, parse_csv, BlockFeatureVector, FeatureError, GlcmConfig, BLOCK_COUNT, CSV_HEADER};
use crate::imaging::{
    split_dataset, Dataset, DatasetManifest, GrayImage, ImagingError, ManifestEntry, SplitSpec,
};
use crate::quantizer::{kmeans_fit, Codebook, KMeansFit, KMeansParams, Point, QuantizerError};
use crate::tangent::{augment_image, TangentError, TransformKind, TransformSet};

const LABELS_MAGIC: &str = "# facebn-labels";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("`{key}` = {value:?}: {msg}")]
    Value { key: String, value: String, msg: String },
    #[error("`{0}` is required")]
    Missing(&'static str),
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Every configuration key, in echo order.
pub const CONFIG_KEYS: [&str; 18] = [
    "dataset-root",
    "manifest",
    "train-fraction",
    "seed",
    "tangent",
    "tangent-transforms",
    "tangent-steps",
    "augment-grid",
    "glcm-levels",
    "glcm-offset",
    "k",
    "kmeans-seed",
    "kmeans-max-iter",
    "kmeans-tol",
    "kind",
    "threshold",
    "output-dir",
    "report-timings",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Defaults to the manifest's directory.
    pub dataset_root: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub split: SplitSpec,
    pub tangent: bool,
    pub tangent_transforms: Vec<TransformKind>,
    /// `None` uses each transform's default step.
    pub tangent_steps: Option<Vec<f64>>,
    pub augment_grid: Vec<f64>,
    pub glcm: GlcmConfig,
    pub kmeans: KMeansParams,
    pub kinds: Vec<String>,
    pub threshold: ThresholdMode,
    pub output_dir: PathBuf,
    /// Print per-stage wall times after a run.
    pub report_timings: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dataset_root: None,
            manifest: None,
            split: SplitSpec {
                train_fraction: 0.5,
                seed: 0,
            },
            tangent: false,
            tangent_transforms: TransformKind::ALL.to_vec(),
            tangent_steps: None,
            augment_grid: vec![1.0],
            glcm: GlcmConfig::default(),
            kmeans: KMeansParams::default(),
            kinds: ["nb", "gtan", "gfan", "tan", "fan"].map(String::from).to_vec(),
            threshold: ThresholdMode::Average,
            output_dir: PathBuf::from("facebn-out"),
            report_timings: false,
        }
    }
}

fn list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| format!("cannot parse {:?}", v.trim())))
        .collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

impl PipelineConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        let bad = |msg: String| ConfigError::Value {
            key: key.to_string(),
            value: value.to_string(),
            msg,
        };
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad("expected a number".into()));
        let int = |v: &str| v.parse::<u64>().map_err(|_| bad("expected a non-negative integer".into()));
        match key {
            "dataset-root" => self.dataset_root = Some(PathBuf::from(value)),
            "manifest" => self.manifest = Some(PathBuf::from(value)),
            "train-fraction" => self.split.train_fraction = num(value)?,
            "seed" => self.split.seed = int(value)?,
            "tangent" => self.tangent = parse_bool(value).map_err(bad)?,
            "tangent-transforms" => {
                self.tangent_transforms = list::<TransformKind>(value).map_err(bad)?
            }
            "tangent-steps" => {
                self.tangent_steps = match value {
                    "" | "default" => None,
                    v => Some(list::<f64>(v).map_err(bad)?),
                }
            }
            "augment-grid" => self.augment_grid = list::<f64>(value).map_err(bad)?,
            "glcm-levels" => self.glcm.levels = int(value)? as usize,
            "glcm-offset" => {
                let v = list::<i32>(value).map_err(bad)?;
                match v[..] {
                    [dx, dy] => self.glcm.offset = (dx, dy),
                    _ => return Err(bad("expected `dx,dy`".into())),
                }
            }
            "k" => self.kmeans.k = int(value)? as usize,
            "kmeans-seed" => self.kmeans.seed = int(value)?,
            "kmeans-max-iter" => self.kmeans.max_iter = int(value)? as usize,
            "kmeans-tol" => self.kmeans.tol = num(value)?,
            "kind" => {
                self.kinds = match value {
                    "all" => Self::default().kinds,
                    v => v.split(',').map(|s| s.trim().to_ascii_lowercase()).collect(),
                }
            }
            "threshold" => self.threshold = value.parse().map_err(bad)?,
            "output-dir" => self.output_dir = PathBuf::from(value),
            "report-timings" => self.report_timings = parse_bool(value).map_err(bad)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Parses `key = value` lines (`#` comments). Relative paths are taken
    /// relative to `base` when given.
    pub fn from_text(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: idx + 1,
                msg: format!("expected `key = value`, got {line:?}"),
            })?;
            cfg.set(key.trim(), value)?;
        }
        if let Some(base) = base {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text, path.parent())
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.dataset_root.as_mut() {
            fix(p);
        }
        if let Some(p) = self.manifest.as_mut() {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    /// Makes every path absolute against the working directory.
    pub fn absolutize(&mut self) -> Result<(), ConfigError> {
        let abs = |p: &mut PathBuf| -> Result<(), ConfigError> {
            *p = std::path::absolute(&*p).map_err(|source| ConfigError::Io {
                path: p.clone(),
                source,
            })?;
            Ok(())
        };
        if let Some(p) = self.dataset_root.as_mut() {
            abs(p)?;
        }
        if let Some(p) = self.manifest.as_mut() {
            abs(p)?;
        }
        abs(&mut self.output_dir)
    }

    pub fn transform_set(&self) -> Result<TransformSet, TangentError> {
        let steps = match &self.tangent_steps {
            Some(s) => s.clone(),
            None => self.tangent_transforms.iter().map(|k| k.default_step()).collect(),
        };
        if steps.len() != self.tangent_transforms.len() {
            return Err(TangentError::Transforms(format!(
                "{} transforms but {} steps",
                self.tangent_transforms.len(),
                steps.len()
            )));
        }
        TransformSet::new(self.tangent_transforms.iter().copied().zip(steps).collect())
    }

    pub fn classifier_kinds(&self) -> Result<Vec<ClassifierKind>, String> {
        if self.kinds.is_empty() {
            return Err("no classifier kind given".into());
        }
        self.kinds
            .iter()
            .map(|k| ClassifierKind::parse(k, self.threshold))
            .collect()
    }

    pub fn dataset_root(&self) -> Option<PathBuf> {
        self.dataset_root.clone().or_else(|| {
            self.manifest
                .as_ref()
                .map(|m| m.parent().map(Path::to_path_buf).unwrap_or_default())
        })
    }

    /// Range checks of every numeric option.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, value: String, msg: &str| ConfigError::Value {
            key: key.to_string(),
            value,
            msg: msg.to_string(),
        };
        let f = self.split.train_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(bad("train-fraction", f.to_string(), "must lie in (0, 1]"));
        }
        self.transform_set()
            .map_err(|e| bad("tangent-steps", self.steps_text(), &e.to_string()))?;
        if self.augment_grid.is_empty()
            || self.augment_grid.iter().any(|&m| !(m > 0.0 && m <= crate::tangent::LOCALITY_STEPS))
        {
            return Err(bad(
                "augment-grid",
                join(&self.augment_grid),
                "magnitudes must lie in (0, 3]",
            ));
        }
        if !(2..=256).contains(&self.glcm.levels) {
            return Err(bad("glcm-levels", self.glcm.levels.to_string(), "must lie in [2, 256]"));
        }
        if self.glcm.offset == (0, 0) {
            return Err(bad("glcm-offset", "0,0".into(), "offset must be nonzero"));
        }
        if !(2..=u16::MAX as usize).contains(&self.kmeans.k) {
            return Err(bad("k", self.kmeans.k.to_string(), "must be at least 2"));
        }
        if self.kmeans.max_iter == 0 {
            return Err(bad("kmeans-max-iter", "0".into(), "must be positive"));
        }
        if !(self.kmeans.tol.is_finite() && self.kmeans.tol >= 0.0) {
            return Err(bad("kmeans-tol", self.kmeans.tol.to_string(), "must be finite and non-negative"));
        }
        if let ThresholdMode::Fixed(s) = self.threshold {
            if s.is_nan() {
                return Err(bad("threshold", "NaN".into(), "must be a number or avg"));
            }
        }
        self.classifier_kinds()
            .map_err(|e| bad("kind", self.kinds.join(","), &e))?;
        Ok(())
    }

    fn steps_text(&self) -> String {
        match &self.tangent_steps {
            Some(s) => join(s),
            None => "default".into(),
        }
    }

    /// The configuration as `key = value` lines, loadable by [`Self::from_text`].
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let values = [
            path(&self.dataset_root),
            path(&self.manifest),
            format!("{}", self.split.train_fraction),
            self.split.seed.to_string(),
            self.tangent.to_string(),
            join(&self.tangent_transforms),
            self.steps_text(),
            join(&self.augment_grid),
            self.glcm.levels.to_string(),
            format!("{},{}", self.glcm.offset.0, self.glcm.offset.1),
            self.kmeans.k.to_string(),
            self.kmeans.seed.to_string(),
            self.kmeans.max_iter.to_string(),
            format!("{:?}", self.kmeans.tol),
            self.kinds.join(","),
            self.threshold.to_string(),
            self.output_dir.display().to_string(),
            self.report_timings.to_string(),
        ];
        let mut out = String::from("# facebn pipeline configuration\n");
        for (key, value) in CONFIG_KEYS.iter().zip(values) {
            if (key == &"dataset-root" || key == &"manifest") && value.is_empty() {
                continue;
            }
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Augment,
    Features,
    Codebook,
    Labels,
    Train,
    Evaluate,
    Classify,
    Persist,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Augment => "augment",
            Stage::Features => "features",
            Stage::Codebook => "codebook",
            Stage::Labels => "labels",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Classify => "classify",
            Stage::Persist => "persist",
        })
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Tangent(#[from] TangentError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Quantizer(#[from] QuantizerError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Evaluation(#[from] EvalError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Data(String),
}

/// A failure annotated with the stage that produced it.
#[derive(Debug, Error)]
#[error("{stage}: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

impl PipelineError {
    pub fn new(stage: Stage, source: impl Into<StageError>) -> Self {
        Self {
            stage,
            source: source.into(),
        }
    }

    /// 2 for configuration errors, 3 for bad or missing data, 4 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match &self.source {
            StageError::Config(_) => EXIT_CONFIG,
            StageError::Tangent(TangentError::Transforms(_) | TangentError::Step(_)) => EXIT_CONFIG,
            StageError::Tangent(_) => EXIT_NUMERIC,
            StageError::Features(FeatureError::Levels(_) | FeatureError::Offset { .. }) => EXIT_CONFIG,
            StageError::Quantizer(QuantizerError::ZeroK) => EXIT_CONFIG,
            StageError::Quantizer(QuantizerError::Data { .. } | QuantizerError::NonFinite) => EXIT_NUMERIC,
            StageError::Classifier(ClassifierError::Bayes(
                BayesError::ZeroConfig { .. } | BayesError::Alpha(_) | BayesError::Shape(_),
            )) => EXIT_NUMERIC,
            _ => EXIT_DATA,
        }
    }
}

fn stage<T, E: Into<StageError>>(s: Stage, r: Result<T, E>) -> Result<T, PipelineError> {
    r.map_err(|e| PipelineError::new(s, e))
}

pub fn write_file(s: Stage, path: &Path, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|source| {
                PipelineError::new(s, StageError::Io { path: dir.to_path_buf(), source })
            })?;
        }
    }
    fs::write(path, contents)
        .map_err(|source| PipelineError::new(s, StageError::Io { path: path.to_path_buf(), source }))
}

pub fn read_file(s: Stage, path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path)
        .map_err(|source| PipelineError::new(s, StageError::Io { path: path.to_path_buf(), source }))
}

/// Loads the manifest named by the configuration.
pub fn load_manifest(cfg: &PipelineConfig) -> Result<DatasetManifest, PipelineError> {
    let path = cfg
        .manifest
        .as_ref()
        .ok_or_else(|| PipelineError::new(Stage::Ingest, ConfigError::Missing("manifest")))?;
    stage(Stage::Ingest, DatasetManifest::load(path))
}

/// Stratified split of the manifest and decoding of both halves.
pub fn ingest(cfg: &PipelineConfig) -> Result<(Dataset, Dataset), PipelineError> {
    let manifest = load_manifest(cfg)?;
    let root = cfg.dataset_root().unwrap_or_default();
    let (train, test) = stage(Stage::Ingest, split_dataset(&manifest, cfg.split))?;
    let train = stage(Stage::Ingest, Dataset::load(&root, train))?;
    let test = stage(Stage::Ingest, Dataset::load(&root, test))?;
    if let (Some(a), Some(b)) = (train.image_dims(), test.image_dims()) {
        if a != b {
            return Err(PipelineError::new(
                Stage::Ingest,
                ImagingError::Dataset(format!("train images are {}x{}, test images {}x{}", a.0, a.1, b.0, b.1)),
            ));
        }
    }
    Ok((train, test))
}

fn variant_path(path: &Path, j: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_t{j:02}.pgm"))
}

/// Each image followed by its tangent variants, named `<stem>_tNN.pgm`
/// next to the original.
pub fn augment_dataset(
    data: &Dataset,
    transforms: &TransformSet,
    grid: &[f64],
) -> Result<Dataset, PipelineError> {
    let variants = stage(
        Stage::Augment,
        data.images
            .par_iter()
            .map(|img| augment_image(img, transforms, grid))
            .collect::<Result<Vec<_>, _>>(),
    )?;
    let mut entries = Vec::new();
    let mut images = Vec::new();
    for ((e, img), vs) in data.manifest.entries().iter().zip(&data.images).zip(variants) {
        entries.push(e.clone());
        images.push(img.clone());
        for (j, v) in vs.into_iter().enumerate() {
            entries.push(ManifestEntry {
                path: variant_path(&e.path, j + 1),
                class: e.class,
            });
            images.push(v);
        }
    }
    let manifest = stage(Stage::Augment, DatasetManifest::new(entries, data.manifest.class_count()))?;
    stage(Stage::Augment, Dataset::from_parts(manifest, images))
}

/// Nine block descriptors per image.
pub fn extract_features(
    images: &[GrayImage],
    glcm: &GlcmConfig,
) -> Result<Vec<Vec<BlockFeatureVector>>, PipelineError> {
    stage(
        Stage::Features,
        images.par_iter().map(|x| describe_image(x, glcm)).collect::<Result<Vec<_>, _>>(),
    )
}

pub fn image_names(manifest: &DatasetManifest) -> Vec<String> {
    manifest
        .entries()
        .iter()
        .map(|e| e.path.to_string_lossy().replace('\\', "/"))
        .collect()
}

pub fn features_csv(names: &[String], features: &[Vec<BlockFeatureVector>]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for (name, ds) in names.iter().zip(features) {
        out.push_str(&csv_rows(name, ds));
    }
    out
}

pub fn read_features_csv(path: &Path) -> Result<Vec<(String, Vec<BlockFeatureVector>)>, PipelineError> {
    let text = read_file(Stage::Features, path)?;
    parse_csv(&text).map_err(|e| {
        PipelineError::new(Stage::Features, StageError::Data(format!("{}: {e}", path.display())))
    })
}

/// k-means codebook over every block descriptor of the training images.
pub fn fit_codebook(
    features: &[Vec<BlockFeatureVector>],
    params: &KMeansParams,
) -> Result<KMeansFit, PipelineError> {
    let points: Vec<Point> = features.iter().flatten().map(BlockFeatureVector::to_array).collect();
    stage(Stage::Codebook, kmeans_fit(&points, params))
}

pub fn labelize_all(
    codebook: &Codebook,
    features: &[Vec<BlockFeatureVector>],
    classes: &[usize],
) -> Result<Vec<Instance>, PipelineError> {
    features
        .iter()
        .zip(classes)
        .map(|(ds, &c)| {
            let lv = stage(Stage::Labels, codebook.labelize(ds))?;
            Ok(Instance::new(lv.as_usizes(), c))
        })
        .collect()
}

/// Label vectors of a set of images together with the attribute space.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub k: usize,
    pub class_count: usize,
    pub names: Vec<String>,
    pub instances: Vec<Instance>,
}

impl LabeledSet {
    pub fn space(&self) -> Result<AttributeSpace, BayesError> {
        AttributeSpace::uniform(BLOCK_COUNT, self.k, self.class_count)
    }

    /// A `# facebn-labels k=.. classes=..` line, a header, then
    /// `image,class,b1..b9` rows.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{LABELS_MAGIC} k={} classes={}\nimage,class", self.k, self.class_count);
        for b in 1..=BLOCK_COUNT {
            out.push_str(&format!(",b{b}"));
        }
        out.push('\n');
        for (name, inst) in self.names.iter().zip(&self.instances) {
            out.push_str(&format!("{name},{}", inst.class));
            for a in &inst.attrs {
                out.push_str(&format!(",{a}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or("empty labels file")?;
        let meta = first
            .strip_prefix(LABELS_MAGIC)
            .ok_or_else(|| format!("expected `{LABELS_MAGIC}` header"))?;
        let mut k = None;
        let mut class_count = None;
        for field in meta.split_whitespace() {
            match field.split_once('=') {
                Some(("k", v)) => k = v.parse().ok(),
                Some(("classes", v)) => class_count = v.parse().ok(),
                _ => return Err(format!("unexpected header field {field:?}")),
            }
        }
        let (k, class_count) = k.zip(class_count).ok_or("header needs k= and classes=")?;
        let mut names = Vec::new();
        let mut instances = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with("image,") {
                continue;
            }
            let fields: Vec<&str> = line.rsplitn(BLOCK_COUNT + 2, ',').collect();
            if fields.len() != BLOCK_COUNT + 2 {
                return Err(format!("line {}: expected {} columns", idx + 1, BLOCK_COUNT + 2));
            }
            let nums = fields[..=BLOCK_COUNT]
                .iter()
                .rev()
                .map(|v| v.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| format!("line {}: bad label", idx + 1))?;
            names.push(fields[BLOCK_COUNT + 1].to_string());
            instances.push(Instance::new(nums[1..].to_vec(), nums[0]));
        }
        Ok(Self {
            k,
            class_count,
            names,
            instances,
        })
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = read_file(Stage::Labels, path)?;
        Self::from_csv(&text).map_err(|e| {
            PipelineError::new(Stage::Labels, StageError::Data(format!("{}: {e}", path.display())))
        })
    }
}

pub fn train_kind(
    kind: ClassifierKind,
    set: &LabeledSet,
) -> Result<TrainedClassifier, PipelineError> {
    let space = stage(Stage::Train, set.space().map_err(ClassifierError::from))?;
    stage(Stage::Train, train(kind, &set.instances, &space))
}

/// Wall time of each stage of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimings(pub Vec<(String, f64)>);

impl StageTimings {
    fn record<T>(&mut self, name: impl Into<String>, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push((name.into(), start.elapsed().as_secs_f64()));
        out
    }

    pub fn to_text(&self) -> String {
        self.0
            .iter()
            .map(|(name, s)| format!("{name} {s:.6}\n"))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub reports: Vec<EvaluationReport>,
    pub output_dir: PathBuf,
    pub timings: StageTimings,
}

/// Runs ingest, optional tangent augmentation of the training images,
/// block features, codebook fitting, labeling, training of every requested
/// classifier and evaluation. Writes into the output directory:
/// `config.txt`, `train.manifest`, `test.manifest`, `features-train.csv`,
/// `features-test.csv`, `codebook.txt`, `labels-train.csv`,
/// `labels-test.csv`, `model-<kind>.txt`, `report.json`, `report.txt` and
/// `timings.txt`. Everything except `timings.txt` is a pure function of the
/// configuration and the input images.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome, PipelineError> {
    let mut cfg = config.clone();
    stage(Stage::Config, cfg.absolutize())?;
    stage(Stage::Config, cfg.validate())?;
    if cfg.manifest.is_none() {
        return Err(PipelineError::new(Stage::Config, ConfigError::Missing("manifest")));
    }
    let kinds = cfg.classifier_kinds().expect("validated");
    let transforms = cfg.transform_set().expect("validated");
    let out = cfg.output_dir.clone();
    let mut t = StageTimings::default();

    write_file(Stage::Persist, &out.join("config.txt"), cfg.to_text())?;

    let (mut train_ds, test_ds) = t.record("ingest", || ingest(&cfg))?;
    write_file(Stage::Persist, &out.join("train.manifest"), train_ds.manifest.render())?;
    write_file(Stage::Persist, &out.join("test.manifest"), test_ds.manifest.render())?;

    if cfg.tangent {
        train_ds = t.record("augment", || augment_dataset(&train_ds, &transforms, &cfg.augment_grid))?;
    }

    let (train_feats, test_feats) = t.record("features", || {
        Ok::<_, PipelineError>((
            extract_features(&train_ds.images, &cfg.glcm)?,
            extract_features(&test_ds.images, &cfg.glcm)?,
        ))
    })?;
    let train_names = image_names(&train_ds.manifest);
    let test_names = image_names(&test_ds.manifest);
    write_file(Stage::Persist, &out.join("features-train.csv"), features_csv(&train_names, &train_feats))?;
    write_file(Stage::Persist, &out.join("features-test.csv"), features_csv(&test_names, &test_feats))?;

    let fit = t.record("codebook", || fit_codebook(&train_feats, &cfg.kmeans))?;
    let codebook = fit.codebook;
    write_file(Stage::Persist, &out.join("codebook.txt"), codebook.to_text())?;

    let class_count = train_ds.manifest.class_count();
    let (train_set, test_set) = t.record("labels", || {
        let train_classes: Vec<usize> = train_ds.classes().collect();
        let test_classes: Vec<usize> = test_ds.classes().collect();
        Ok::<_, PipelineError>((
            LabeledSet {
                k: codebook.k(),
                class_count,
                names: train_names.clone(),
                instances: labelize_all(&codebook, &train_feats, &train_classes)?,
            },
            LabeledSet {
                k: codebook.k(),
                class_count,
                names: test_names.clone(),
                instances: labelize_all(&codebook, &test_feats, &test_classes)?,
            },
        ))
    })?;
    write_file(Stage::Persist, &out.join("labels-train.csv"), train_set.to_csv())?;
    write_file(Stage::Persist, &out.join("labels-test.csv"), test_set.to_csv())?;

    let mut reports = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let clf = t.record(format!("train {}", kind.name()), || train_kind(kind, &train_set))?;
        write_file(Stage::Persist, &out.join(format!("model-{}.txt", kind.name())), clf.to_text())?;
        let report = t.record(format!("evaluate {}", kind.name()), || {
            stage(Stage::Evaluate, evaluate(&clf, &train_set.instances, &test_set.instances))
        })?;
        reports.push(report);
    }
    write_file(Stage::Persist, &out.join("report.json"), reports_to_json(&reports))?;
    write_file(Stage::Persist, &out.join("report.txt"), render_text(&reports))?;
    write_file(Stage::Persist, &out.join("timings.txt"), t.to_text())?;

    Ok(PipelineOutcome {
        reports,
        output_dir: out,
        timings: t,
    })
}
