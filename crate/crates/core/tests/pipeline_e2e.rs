mod common;

use std::fs;
use std::path::Path;

use facebn::classifiers::TrainedClassifier;
use facebn::evaluation::reports_from_json;
use facebn::imaging::ImagingError;
use facebn::pipeline::{run_pipeline, LabeledSet, PipelineConfig, Stage, StageError, EXIT_CONFIG, EXIT_DATA};

fn config(manifest: &str, out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.set("manifest", common::synthetic_dir().join(manifest).to_str().unwrap()).unwrap();
    cfg.set("output-dir", out.to_str().unwrap()).unwrap();
    cfg.set("k", "6").unwrap();
    cfg
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

const DETERMINISTIC: [&str; 9] = [
    "config.txt",
    "train.manifest",
    "test.manifest",
    "features-train.csv",
    "codebook.txt",
    "labels-train.csv",
    "labels-test.csv",
    "report.json",
    "report.txt",
];

#[test]
fn two_class_subset_is_separated_by_naive_bayes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config("manifest-2class.txt", tmp.path());
    cfg.set("kind", "nb").unwrap();
    let outcome = run_pipeline(&cfg).unwrap();
    assert_eq!(outcome.reports.len(), 1);
    let r = &outcome.reports[0];
    assert_eq!(r.class_count, 2);
    assert_eq!(r.train.pcc, 1.0);
    assert_eq!(r.test.pcc, 1.0);
    assert_eq!(r.test.class_rates, vec![Some(1.0), Some(1.0)]);
}

#[test]
fn every_variant_reports_consistently_and_persists() {
    let tmp = tempfile::tempdir().unwrap();
    let outcome = run_pipeline(&config("manifest.txt", tmp.path())).unwrap();
    let kinds: Vec<&str> = outcome.reports.iter().map(|r| r.kind.as_str()).collect();
    assert_eq!(kinds, ["nb", "gtan", "gfan", "tan", "fan"]);
    for r in &outcome.reports {
        assert!(r.is_consistent(), "{}", r.kind);
        assert_eq!(r.train.instances + r.test.instances, 50);
        assert!(r.test.pcc >= 0.8, "{} {}", r.kind, r.test.pcc);
    }
    let from_disk = reports_from_json(&String::from_utf8(read(tmp.path(), "report.json")).unwrap()).unwrap();
    let mut expected = outcome.reports.clone();
    for r in &mut expected {
        r.timings = Default::default();
    }
    assert_eq!(from_disk, expected);
    let labels = LabeledSet::load(&tmp.path().join("labels-test.csv")).unwrap();
    assert_eq!(labels.k, 6);
    assert_eq!(labels.instances.len(), 25);
    for kind in kinds {
        let text = String::from_utf8(read(tmp.path(), &format!("model-{kind}.txt"))).unwrap();
        assert_eq!(TrainedClassifier::from_text(&text).unwrap().kind.name(), kind);
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(&config("manifest.txt", a.path())).unwrap();
    run_pipeline(&config("manifest.txt", b.path())).unwrap();
    for name in DETERMINISTIC.iter().skip(1) {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
}

#[test]
fn echoed_config_reproduces_the_run() {
    let first = tempfile::tempdir().unwrap();
    let mut cfg = config("manifest.txt", first.path());
    cfg.set("seed", "41").unwrap();
    cfg.set("kind", "gfan,tan").unwrap();
    cfg.set("threshold", "0.05").unwrap();
    run_pipeline(&cfg).unwrap();

    let second = tempfile::tempdir().unwrap();
    let mut echoed = PipelineConfig::load(first.path().join("config.txt")).unwrap();
    echoed.set("output-dir", second.path().to_str().unwrap()).unwrap();
    run_pipeline(&echoed).unwrap();
    for name in DETERMINISTIC.iter().skip(1) {
        assert_eq!(read(first.path(), name), read(second.path(), name), "{name}");
    }
}

#[test]
fn tangent_augmentation_grows_only_the_training_set() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config("manifest.txt", tmp.path());
    cfg.set("tangent", "true").unwrap();
    cfg.set("augment-grid", "1").unwrap();
    cfg.set("kind", "nb,fan").unwrap();
    let outcome = run_pipeline(&cfg).unwrap();
    for r in &outcome.reports {
        assert_eq!(r.train.instances, 25 * 9);
        assert_eq!(r.test.instances, 25);
        assert!(r.is_consistent());
    }
}

#[test]
fn missing_manifest_fails_at_ingest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config("no-such-manifest.txt", tmp.path());
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Ingest);
    assert!(matches!(err.source, StageError::Imaging(ImagingError::Io { .. })));
    assert_eq!(err.exit_code(), EXIT_DATA);
}

#[test]
fn invalid_configuration_fails_before_any_work() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config("manifest.txt", tmp.path());
    cfg.set("k", "0").unwrap();
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Config);
    assert_eq!(err.exit_code(), EXIT_CONFIG);
    assert!(!tmp.path().join("features-train.csv").exists());
}
