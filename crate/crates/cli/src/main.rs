use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use facebn::bayesnet::robinson_dag_count;
use facebn::classifiers::{classify, TrainedClassifier};
use facebn::evaluation::{evaluate, render_table, render_text, reports_to_json};
use facebn::features::describe_image;
use facebn::imaging::{load_image, save_image, Dataset};
use facebn::pipeline::{
    augment_dataset, extract_features, features_csv, fit_codebook, image_names, ingest,
    labelize_all, load_manifest, read_features_csv, read_file, run_pipeline, train_kind,
    write_file, ConfigError, LabeledSet, PipelineConfig, PipelineError, Stage, StageError,
};
use facebn::quantizer::Codebook;

const MAX_DAG_NODES: usize = 25;

#[derive(Parser)]
#[command(name = "facebn", version, about = "Face classification with block texture labels and Bayesian-network classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration file plus one flag per configuration key.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// `key = value` configuration file; flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "dataset-root", value_name = "DIR")]
    dataset_root: Option<String>,
    #[arg(long, value_name = "FILE")]
    manifest: Option<String>,
    #[arg(long = "train-fraction", value_name = "F")]
    train_fraction: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    tangent: Option<String>,
    #[arg(long = "tangent-transforms", value_name = "LIST")]
    tangent_transforms: Option<String>,
    #[arg(long = "tangent-steps", value_name = "LIST")]
    tangent_steps: Option<String>,
    #[arg(long = "augment-grid", value_name = "LIST")]
    augment_grid: Option<String>,
    #[arg(long = "glcm-levels", value_name = "G")]
    glcm_levels: Option<String>,
    #[arg(long = "glcm-offset", value_name = "DX,DY", allow_hyphen_values = true)]
    glcm_offset: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long = "kmeans-seed")]
    kmeans_seed: Option<String>,
    #[arg(long = "kmeans-max-iter")]
    kmeans_max_iter: Option<String>,
    #[arg(long = "kmeans-tol")]
    kmeans_tol: Option<String>,
    /// nb, gtan, gfan, tan, fan, a comma-separated list of these, or all
    #[arg(long)]
    kind: Option<String>,
    /// avg or a fixed conditional mutual information value
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<String>,
    #[arg(long = "output-dir", value_name = "DIR")]
    output_dir: Option<String>,
    #[arg(long = "report-timings", num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    report_timings: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig, PipelineError> {
        let err = |e: ConfigError| PipelineError::new(Stage::Config, e);
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path).map_err(err)?,
            None => PipelineConfig::default(),
        };
        let overrides = [
            ("dataset-root", &self.dataset_root),
            ("manifest", &self.manifest),
            ("train-fraction", &self.train_fraction),
            ("seed", &self.seed),
            ("tangent", &self.tangent),
            ("tangent-transforms", &self.tangent_transforms),
            ("tangent-steps", &self.tangent_steps),
            ("augment-grid", &self.augment_grid),
            ("glcm-levels", &self.glcm_levels),
            ("glcm-offset", &self.glcm_offset),
            ("k", &self.k),
            ("kmeans-seed", &self.kmeans_seed),
            ("kmeans-max-iter", &self.kmeans_max_iter),
            ("kmeans-tol", &self.kmeans_tol),
            ("kind", &self.kind),
            ("threshold", &self.threshold),
            ("output-dir", &self.output_dir),
            ("report-timings", &self.report_timings),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v).map_err(err)?;
            }
        }
        cfg.validate().map_err(err)?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write all intermediates and reports
    Run(ConfigArgs),
    /// Split the manifest into train.manifest and test.manifest
    Ingest(ConfigArgs),
    /// Write tangent variants of every image plus augmented.manifest
    Augment(ConfigArgs),
    /// Write block descriptors of every image in the manifest as CSV
    Features {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Defaults to <output-dir>/features.csv
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a k-means codebook or turn descriptors into label vectors
    Codebook {
        #[command(subcommand)]
        action: CodebookCommand,
    },
    /// Train classifiers on a labels file
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        labels: PathBuf,
        /// Defaults to <output-dir>/model-<kind>.txt; single kind only
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score trained classifiers on training and test labels
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        #[arg(long = "train-labels")]
        train_labels: PathBuf,
        #[arg(long = "test-labels")]
        test_labels: PathBuf,
    },
    /// Predict classes of labeled vectors or of raw images
    Classify {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with_all = ["codebook", "images"])]
        labels: Option<PathBuf>,
        #[arg(long, requires = "images")]
        codebook: Option<PathBuf>,
        #[arg(long = "image")]
        images: Vec<PathBuf>,
    },
    /// Print the number of labeled DAGs on n nodes
    DagCount { n: usize },
}

#[derive(Subcommand)]
enum CodebookCommand {
    /// Fit on a features CSV
    Fit {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        features: PathBuf,
        /// Defaults to <output-dir>/codebook.txt
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label a features CSV; classes come from the manifest
    Apply {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        codebook: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Defaults to <output-dir>/labels.csv
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn data_error(stage: Stage, msg: impl Into<String>) -> PipelineError {
    PipelineError::new(stage, StageError::Data(msg.into()))
}

fn load_dataset(cfg: &PipelineConfig) -> Result<Dataset, PipelineError> {
    let manifest = load_manifest(cfg)?;
    let root = cfg.dataset_root().unwrap_or_default();
    Dataset::load(&root, manifest).map_err(|e| PipelineError::new(Stage::Ingest, e))
}

fn load_codebook(path: &Path) -> Result<Codebook, PipelineError> {
    let text = read_file(Stage::Codebook, path)?;
    Codebook::from_text(&text).map_err(|e| PipelineError::new(Stage::Codebook, e))
}

fn load_model(path: &Path) -> Result<TrainedClassifier, PipelineError> {
    let text = read_file(Stage::Train, path)?;
    TrainedClassifier::from_text(&text).map_err(|e| PipelineError::new(Stage::Train, e))
}

fn cmd_run(args: &ConfigArgs) -> Result<(), PipelineError> {
    let cfg = args.resolve()?;
    let outcome = run_pipeline(&cfg)?;
    print!("{}", render_table(&outcome.reports));
    if cfg.report_timings {
        eprint!("{}", outcome.timings.to_text());
    }
    println!("artifacts written to {}", outcome.output_dir.display());
    Ok(())
}

fn cmd_ingest(args: &ConfigArgs) -> Result<(), PipelineError> {
    let cfg = args.resolve()?;
    let (train, test) = ingest(&cfg)?;
    write_file(Stage::Ingest, &cfg.output_dir.join("train.manifest"), train.manifest.render())?;
    write_file(Stage::Ingest, &cfg.output_dir.join("test.manifest"), test.manifest.render())?;
    println!(
        "{} training and {} test images in {} classes",
        train.images.len(),
        test.images.len(),
        train.manifest.class_count()
    );
    Ok(())
}

fn cmd_augment(args: &ConfigArgs) -> Result<(), PipelineError> {
    let cfg = args.resolve()?;
    let data = load_dataset(&cfg)?;
    let transforms = cfg
        .transform_set()
        .map_err(|e| PipelineError::new(Stage::Config, e))?;
    let augmented = augment_dataset(&data, &transforms, &cfg.augment_grid)?;
    for (e, img) in augmented.manifest.entries().iter().zip(&augmented.images) {
        let path = cfg.output_dir.join(&e.path);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|source| {
                PipelineError::new(Stage::Augment, StageError::Io { path: dir.to_path_buf(), source })
            })?;
        }
        save_image(&path, img).map_err(|e| PipelineError::new(Stage::Augment, e))?;
    }
    let manifest = cfg.output_dir.join("augmented.manifest");
    write_file(Stage::Augment, &manifest, augmented.manifest.render())?;
    println!("{} images written, manifest {}", augmented.images.len(), manifest.display());
    Ok(())
}

fn cmd_features(args: &ConfigArgs, out: Option<&Path>) -> Result<(), PipelineError> {
    let cfg = args.resolve()?;
    let data = load_dataset(&cfg)?;
    let feats = extract_features(&data.images, &cfg.glcm)?;
    let out = out.map_or_else(|| cfg.output_dir.join("features.csv"), Path::to_path_buf);
    write_file(Stage::Features, &out, features_csv(&image_names(&data.manifest), &feats))?;
    println!("{} images described, {}", feats.len(), out.display());
    Ok(())
}

fn cmd_codebook_fit(args: &ConfigArgs, features: &Path, out: Option<&Path>) -> Result<(), PipelineError> {
    let cfg = args.resolve()?;
    let feats: Vec<_> = read_features_csv(features)?.into_iter().map(|(_, d)| d).collect();
    let fit = fit_codebook(&feats, &cfg.kmeans)?;
    let out = out.map_or_else(|| cfg.output_dir.join("codebook.txt"), Path::to_path_buf);
    write_file(Stage::Codebook, &out, fit.codebook.to_text())?;
    println!(
        "k = {}, {} iterations, converged {}, inertia {:.6}, {}",
        fit.codebook.k(),
        fit.iterations,
        fit.converged,
        fit.final_inertia(),
        out.display()
    );
    Ok(())
}

fn cmd_codebook_apply(
    args: &ConfigArgs,
    codebook: &Path,
    features: &Path,
    out: Option<&Path>,
) -> Result<(), PipelineError> {
    let cfg = args.resolve()?;
    let manifest = load_manifest(&cfg)?;
    let classes: HashMap<String, usize> = image_names(&manifest)
        .into_iter()
        .zip(manifest.entries().iter().map(|e| e.class))
        .collect();
    let codebook = load_codebook(codebook)?;
    let rows = read_features_csv(features)?;
    let mut names = Vec::with_capacity(rows.len());
    let mut feats = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (name, d) in rows {
        let class = *classes
            .get(&name)
            .ok_or_else(|| data_error(Stage::Labels, format!("{name} is not in the manifest")))?;
        names.push(name);
        feats.push(d);
        labels.push(class);
    }
    let set = LabeledSet {
        k: codebook.k(),
        class_count: manifest.class_count(),
        names,
        instances: labelize_all(&codebook, &feats, &labels)?,
    };
    let out = out.map_or_else(|| cfg.output_dir.join("labels.csv"), Path::to_path_buf);
    write_file(Stage::Labels, &out, set.to_csv())?;
    println!("{} label vectors, {}", set.instances.len(), out.display());
    Ok(())
}

fn cmd_train(args: &ConfigArgs, labels: &Path, out: Option<&Path>) -> Result<(), PipelineError> {
    let cfg = args.resolve()?;
    let kinds = cfg.classifier_kinds().expect("validated");
    if out.is_some() && kinds.len() > 1 {
        return Err(PipelineError::new(
            Stage::Config,
            ConfigError::Value {
                key: "kind".into(),
                value: cfg.kinds.join(","),
                msg: "--out needs a single kind".into(),
            },
        ));
    }
    let set = LabeledSet::load(labels)?;
    for kind in kinds {
        let clf = train_kind(kind, &set)?;
        let path = out.map_or_else(
            || cfg.output_dir.join(format!("model-{}.txt", kind.name())),
            Path::to_path_buf,
        );
        write_file(Stage::Train, &path, clf.to_text())?;
        println!("{kind}: {}", path.display());
    }
    Ok(())
}

fn cmd_evaluate(
    args: &ConfigArgs,
    models: &[PathBuf],
    train_labels: &Path,
    test_labels: &Path,
) -> Result<(), PipelineError> {
    let cfg = args.resolve()?;
    let train = LabeledSet::load(train_labels)?;
    let test = LabeledSet::load(test_labels)?;
    let mut reports = Vec::new();
    for path in models {
        let clf = load_model(path)?;
        let report = evaluate(&clf, &train.instances, &test.instances)
            .map_err(|e| PipelineError::new(Stage::Evaluate, e))?;
        reports.push(report);
    }
    write_file(Stage::Evaluate, &cfg.output_dir.join("report.json"), reports_to_json(&reports))?;
    write_file(Stage::Evaluate, &cfg.output_dir.join("report.txt"), render_text(&reports))?;
    print!("{}", render_table(&reports));
    Ok(())
}

fn print_prediction(name: &str, class: usize, posterior: &[f64]) {
    let post: Vec<String> = posterior.iter().map(|p| format!("{p:.6}")).collect();
    println!("{name}\t{class}\t{}", post.join(" "));
}

fn cmd_classify(
    args: &ConfigArgs,
    model: &Path,
    labels: Option<&Path>,
    codebook: Option<&Path>,
    images: &[PathBuf],
) -> Result<(), PipelineError> {
    let cfg = args.resolve()?;
    let clf = load_model(model)?;
    let err = |e| PipelineError::new(Stage::Classify, e);
    match (labels, codebook) {
        (Some(labels), _) => {
            let set = LabeledSet::load(labels)?;
            for (name, inst) in set.names.iter().zip(&set.instances) {
                let (c, post) = classify(&clf, &inst.attrs).map_err(err)?;
                print_prediction(name, c, &post);
            }
        }
        (None, Some(codebook)) => {
            let codebook = load_codebook(codebook)?;
            for path in images {
                let img = load_image(path).map_err(|e| PipelineError::new(Stage::Ingest, e))?;
                let desc = describe_image(&img, &cfg.glcm).map_err(|e| PipelineError::new(Stage::Features, e))?;
                let lv = codebook.labelize(&desc).map_err(|e| PipelineError::new(Stage::Labels, e))?;
                let (c, post) = classify(&clf, &lv.as_usizes()).map_err(err)?;
                print_prediction(&path.display().to_string(), c, &post);
            }
        }
        (None, None) => {
            return Err(PipelineError::new(
                Stage::Config,
                ConfigError::Value {
                    key: "labels".into(),
                    value: String::new(),
                    msg: "give --labels or --codebook with --image".into(),
                },
            ))
        }
    }
    Ok(())
}

fn cmd_dag_count(n: usize) -> Result<(), PipelineError> {
    if n > MAX_DAG_NODES {
        return Err(PipelineError::new(
            Stage::Config,
            ConfigError::Value {
                key: "n".into(),
                value: n.to_string(),
                msg: format!("must lie in [0, {MAX_DAG_NODES}]"),
            },
        ));
    }
    println!("{}", robinson_dag_count(n));
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Ingest(args) => cmd_ingest(&args),
        Command::Augment(args) => cmd_augment(&args),
        Command::Features { cfg, out } => cmd_features(&cfg, out.as_deref()),
        Command::Codebook { action } => match action {
            CodebookCommand::Fit { cfg, features, out } => cmd_codebook_fit(&cfg, &features, out.as_deref()),
            CodebookCommand::Apply {
                cfg,
                codebook,
                features,
                out,
            } => cmd_codebook_apply(&cfg, &codebook, &features, out.as_deref()),
        },
        Command::Train { cfg, labels, out } => cmd_train(&cfg, &labels, out.as_deref()),
        Command::Evaluate {
            cfg,
            models,
            train_labels,
            test_labels,
        } => cmd_evaluate(&cfg, &models, &train_labels, &test_labels),
        Command::Classify {
            cfg,
            model,
            labels,
            codebook,
            images,
        } => cmd_classify(&cfg, &model, labels.as_deref(), codebook.as_deref(), &images),
        Command::DagCount { n } => cmd_dag_count(n),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
