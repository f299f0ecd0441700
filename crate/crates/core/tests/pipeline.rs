use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use forge_core::dataset::{read_dataset, DatasetManifest};
use forge_core::filter::FilterReport;
use forge_core::jsonl::read_json;
use forge_core::pipeline::{run_pipeline, ExitStatus, PipelineConfig, Stage};
use tempfile::TempDir;
use walkdir::WalkDir;

fn corpus_manifest() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus/manifest.json")
}

fn config(out: &Path) -> PipelineConfig {
    PipelineConfig {
        manifest: corpus_manifest(),
        exclude: vec!["src/broken/**".into()],
        seed: 42,
        out: out.to_path_buf(),
        ..Default::default()
    }
}

const ALL: [Stage; 4] = [Stage::Build, Stage::Ingest, Stage::Filter, Stage::Extract];

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e
                .path()
                .strip_prefix(root)
                .unwrap()
                .to_string_lossy()
                .into_owned();
            (rel, fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn full_pipeline_is_consistent_and_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let outcome = run_pipeline(&config(a.path()), &ALL).unwrap();
    assert_eq!(outcome.status, ExitStatus::Ok, "{:#?}", outcome.reports);
    let order: Vec<Stage> = outcome.reports.iter().map(|r| r.stage).collect();
    assert_eq!(
        order,
        [Stage::Ingest, Stage::Extract, Stage::Filter, Stage::Build]
    );

    let ds = a.path().join("dataset");
    let manifest: DatasetManifest = read_json(&ds.join("manifest.json")).unwrap();
    for name in ["train", "validation", "test"] {
        let lines = fs::read_to_string(ds.join(format!("{name}.jsonl")))
            .unwrap()
            .lines()
            .count();
        assert_eq!(lines, manifest.counts[name], "{name}");
    }
    let (entries, assignment) = read_dataset(&ds).unwrap();
    assert_eq!(entries.len(), manifest.total);
    assert_eq!(assignment.sizes().iter().sum::<usize>(), manifest.total);
    assert!(
        manifest.total >= 10,
        "corpus yields {} entries",
        manifest.total
    );

    let report: FilterReport = read_json(&a.path().join("filter_report.json")).unwrap();
    assert_eq!(
        report.kept + report.rejected + report.duplicates_dropped,
        report.input
    );

    run_pipeline(&config(b.path()), &ALL).unwrap();
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (k, v) in &sa {
        assert!(sb[k] == *v, "{k} differs between runs");
    }
}

#[test]
fn partial_runs_resume_from_artifacts() {
    let dir = TempDir::new().unwrap();
    let cfg = config(dir.path());
    run_pipeline(&cfg, &[Stage::Ingest, Stage::Extract]).unwrap();
    let outcome = run_pipeline(&cfg, &[Stage::Build, Stage::Filter]).unwrap();
    assert_eq!(outcome.status, ExitStatus::Ok);
    assert!(dir.path().join("dataset/train.jsonl").exists());
}

#[test]
fn broken_file_marks_run_degraded() {
    let dir = TempDir::new().unwrap();
    let cfg = PipelineConfig {
        exclude: Vec::new(),
        ..config(dir.path())
    };
    let outcome = run_pipeline(&cfg, &[Stage::Ingest, Stage::Extract]).unwrap();
    assert_eq!(outcome.status, ExitStatus::Degraded);
    assert_eq!(outcome.status.code(), 3);
}

#[test]
fn build_without_kept_names_filter() {
    let dir = TempDir::new().unwrap();
    let err = run_pipeline(&config(dir.path()), &[Stage::Build]).unwrap_err();
    assert!(err.to_string().contains("run filter first"), "{err}");
}
