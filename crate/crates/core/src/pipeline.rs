//! Stage orchestration: ingest → extract → filter → build, resumable from
//! the artifacts each stage leaves in the output directory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::{apply_review, Decision, ReviewPolicy};
use crate::dataset::{self, AssembleConfig, DatasetManifest, SplitAssignment, DEFAULT_RATIOS};
use crate::error::{Error, Result};
use crate::extract::{extract_file, ExtractionRecord, RecordLine};
use crate::filter::{apply_filters, FilterReport, RuleSet};
use crate::ingest::{
    discover_sources, inventory, read_source, DiscoverOptions, InventoryLine, RepoManifest,
};
use crate::jsonl::{read_json, read_jsonl, to_jsonl_bytes, write_atomic, write_json};
use crate::metrics::TokenizerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Extract,
    Filter,
    Build,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Ingest, Stage::Extract, Stage::Filter, Stage::Build];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Extract => "extract",
            Stage::Filter => "filter",
            Stage::Build => "build",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!("unknown stage `{s}` (ingest|extract|filter|build)"))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub manifest: PathBuf,
    /// Filter rule file; the built-in catalog when absent.
    pub rules: Option<PathBuf>,
    pub ratios: [f64; 3],
    pub seed: u64,
    pub stratify_by_repo: bool,
    pub include_types: bool,
    pub exclude: Vec<String>,
    pub tokenizer: TokenizerConfig,
    pub template: Option<PathBuf>,
    pub adapter: Option<String>,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            manifest: PathBuf::from("manifest.json"),
            rules: None,
            ratios: DEFAULT_RATIOS,
            seed: 0,
            stratify_by_repo: false,
            include_types: false,
            exclude: Vec::new(),
            tokenizer: TokenizerConfig::default(),
            template: None,
            adapter: None,
            out: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    /// Reads a JSON config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = read_json(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.manifest);
        fix(&mut cfg.out);
        if let Some(p) = cfg.rules.as_mut() {
            fix(p);
        }
        if let Some(p) = cfg.template.as_mut() {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let must_exist = |what: &str, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{what} {} does not exist",
                    p.display()
                )))
            }
        };
        must_exist("manifest", &self.manifest)?;
        if let Some(p) = &self.rules {
            must_exist("rule set", p)?;
        }
        if let Some(p) = &self.template {
            must_exist("template", p)?;
        }
        dataset::validate_ratios(self.ratios)
    }

    pub fn artifacts(&self) -> Artifacts {
        Artifacts::new(&self.out)
    }

    pub fn rule_set(&self) -> Result<RuleSet> {
        match &self.rules {
            Some(p) => RuleSet::load(p),
            None => Ok(RuleSet::default()),
        }
    }

    pub fn assemble_config(&self) -> AssembleConfig {
        if self.include_types {
            AssembleConfig::with_types()
        } else {
            AssembleConfig::default()
        }
    }
}

/// Fixed artifact locations under the output root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifacts {
    pub inventory: PathBuf,
    pub records: PathBuf,
    pub extract_report: PathBuf,
    pub kept: PathBuf,
    pub filter_report: PathBuf,
    pub dataset: PathBuf,
}

impl Artifacts {
    pub fn new(out: &Path) -> Self {
        Artifacts {
            inventory: out.join("inventory.jsonl"),
            records: out.join("records.jsonl"),
            extract_report: out.join("extract_report.json"),
            kept: out.join("kept.jsonl"),
            filter_report: out.join("filter_report.json"),
            dataset: out.join("dataset"),
        }
    }
}

fn require(path: &Path, producer: Stage) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            stage: producer.to_string(),
            path: path.to_path_buf(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files: usize,
    pub kept: usize,
    pub discarded: usize,
    pub lossy_decodes: usize,
    pub skipped_large: usize,
    pub per_repo: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
}

pub fn run_ingest(
    manifest: &RepoManifest,
    opts: &DiscoverOptions,
    out: &Path,
) -> Result<IngestReport> {
    let found = discover_sources(manifest, opts)?;
    let lines = inventory(&found.files);
    write_atomic(out, &to_jsonl_bytes(&lines)?)?;
    let kept = lines.iter().filter(|l| l.kept).count();
    let mut per_repo = BTreeMap::new();
    for l in &lines {
        *per_repo.entry(l.repo.clone()).or_insert(0) += 1;
    }
    Ok(IngestReport {
        files: lines.len(),
        kept,
        discarded: lines.len() - kept,
        lossy_decodes: found.lossy_decodes,
        skipped_large: found.skipped_large,
        per_repo,
        warnings: found.warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractReport {
    pub files: usize,
    pub records: usize,
    pub orphans: usize,
    pub parse_degraded: Vec<String>,
    pub lossy_decodes: usize,
    pub per_kind: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
}

/// Extracts records from every kept inventory file, in inventory order.
pub fn run_extract(
    manifest: &RepoManifest,
    inventory_path: &Path,
    out: &Path,
    report_path: &Path,
) -> Result<ExtractReport> {
    let lines: Vec<InventoryLine> = read_jsonl(inventory_path)?;
    let repos: BTreeMap<&str, _> = manifest
        .repos
        .iter()
        .map(|r| (r.name.as_str(), r))
        .collect();
    let kept: Vec<&InventoryLine> = lines.iter().filter(|l| l.kept).collect();
    for l in &kept {
        if !repos.contains_key(l.repo.as_str()) {
            return Err(Error::Validation(format!(
                "inventory names repo {} absent from the manifest",
                l.repo
            )));
        }
    }
    let results: Vec<Result<(crate::extract::FileExtraction, bool, String)>> = kept
        .par_iter()
        .map(|l| {
            let repo = repos[l.repo.as_str()];
            let (file, lossy) = read_source(repo, &l.rel_path)?;
            Ok((
                extract_file(&file, &repo.license_id),
                lossy,
                format!("{}/{}", l.repo, l.rel_path),
            ))
        })
        .collect();
    let mut report = ExtractReport {
        files: kept.len(),
        records: 0,
        orphans: 0,
        parse_degraded: Vec::new(),
        lossy_decodes: 0,
        per_kind: BTreeMap::new(),
        warnings: Vec::new(),
        errors: Vec::new(),
    };
    let mut records: Vec<RecordLine> = Vec::new();
    for r in results {
        match r {
            Ok((fx, lossy, name)) => {
                report.orphans += fx.orphans;
                if fx.parse_degraded {
                    report.parse_degraded.push(name.clone());
                }
                if lossy {
                    report.lossy_decodes += 1;
                }
                report.warnings.extend(
                    fx.warnings
                        .iter()
                        .map(|w| format!("{name}@{}: {}", w.offset, w.message)),
                );
                for rec in &fx.records {
                    *report
                        .per_kind
                        .entry(rec.decl.kind.as_str().to_string())
                        .or_insert(0) += 1;
                    records.push(rec.into());
                }
            }
            Err(e) => report.errors.push(e.to_string()),
        }
    }
    report.records = records.len();
    write_atomic(out, &to_jsonl_bytes(&records)?)?;
    write_json(report_path, &report)?;
    Ok(report)
}

pub fn read_records(path: &Path) -> Result<Vec<ExtractionRecord>> {
    Ok(read_jsonl::<RecordLine>(path)?
        .into_iter()
        .map(Into::into)
        .collect())
}

pub fn run_filter(
    records_path: &Path,
    rules: &RuleSet,
    kept_out: &Path,
    report_out: &Path,
) -> Result<FilterReport> {
    let records = read_records(records_path)?;
    let outcome = apply_filters(records, rules);
    let kept: Vec<RecordLine> = outcome.kept.iter().map(Into::into).collect();
    write_atomic(kept_out, &to_jsonl_bytes(&kept)?)?;
    let report = outcome.report();
    write_json(report_out, &report)?;
    Ok(report)
}

pub fn run_build(
    kept_path: &Path,
    cfg: &AssembleConfig,
    ratios: [f64; 3],
    seed: u64,
    stratify_by_repo: bool,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    let kept = read_records(kept_path)?;
    let entries = dataset::assemble(&kept, cfg)?;
    let assignment = dataset::split(&entries, ratios, seed, stratify_by_repo)?;
    let manifest = dataset::write_dataset(&entries, &assignment, out_dir)?;
    let stats = dataset::dataset_stats(&entries, &assignment);
    write_json(&out_dir.join("stats.json"), &stats)?;
    Ok(manifest)
}

/// Drops reviewed-out entries from a dataset, keeping every survivor in its
/// original split.
pub fn run_review_apply(
    dataset_dir: &Path,
    decisions: &[Decision],
    policy: ReviewPolicy,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    let (entries, assignment) = dataset::read_dataset(dataset_dir)?;
    let ids: Vec<String> = entries.iter().map(|e| e.id.clone()).collect();
    let kept: std::collections::HashSet<String> =
        apply_review(&ids, decisions, policy)?.into_iter().collect();
    let retain = |v: &[String]| {
        v.iter()
            .filter(|id| kept.contains(*id))
            .cloned()
            .collect::<Vec<_>>()
    };
    let narrowed = SplitAssignment {
        train: retain(&assignment.train),
        validation: retain(&assignment.validation),
        test: retain(&assignment.test),
        seed: assignment.seed,
        ratios: assignment.ratios,
    };
    let survivors: Vec<_> = entries
        .into_iter()
        .filter(|e| kept.contains(&e.id))
        .collect();
    dataset::write_dataset(&survivors, &narrowed, out_dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub errors: Vec<String>,
    pub degraded: bool,
    pub summary: serde_json::Value,
}

/// Process exit codes shared by every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Ok,
    Validation,
    Runtime,
    Degraded,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Ok => 0,
            ExitStatus::Validation => 1,
            ExitStatus::Runtime => 2,
            ExitStatus::Degraded => 3,
        }
    }

    pub fn from_error(e: &Error) -> Self {
        if e.is_validation() {
            ExitStatus::Validation
        } else {
            ExitStatus::Runtime
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub reports: Vec<StageReport>,
    pub status: ExitStatus,
}

fn summary<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::json("stage report", e))
}

/// Runs the requested stages in pipeline order. A stage whose input is
/// missing fails naming the stage that produces it.
pub fn run_pipeline(cfg: &PipelineConfig, stages: &[Stage]) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let mut ordered: Vec<Stage> = stages.to_vec();
    ordered.sort();
    ordered.dedup();
    let art = cfg.artifacts();
    let needs_manifest = ordered
        .iter()
        .any(|s| matches!(s, Stage::Ingest | Stage::Extract));
    let manifest = if needs_manifest {
        Some(RepoManifest::load(&cfg.manifest)?)
    } else {
        None
    };
    let rules = cfg.rule_set()?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;

    let mut reports = Vec::new();
    for stage in ordered {
        let _span = tracing::info_span!("stage", stage = stage.as_str()).entered();
        let report = match stage {
            Stage::Ingest => {
                let opts = DiscoverOptions {
                    exclude: cfg.exclude.clone(),
                };
                let r = run_ingest(manifest.as_ref().expect("loaded"), &opts, &art.inventory)?;
                StageReport {
                    stage,
                    errors: vec![],
                    degraded: false,
                    summary: summary(&r)?,
                }
            }
            Stage::Extract => {
                require(&art.inventory, Stage::Ingest)?;
                let r = run_extract(
                    manifest.as_ref().expect("loaded"),
                    &art.inventory,
                    &art.records,
                    &art.extract_report,
                )?;
                StageReport {
                    stage,
                    errors: r.errors.clone(),
                    degraded: !r.parse_degraded.is_empty(),
                    summary: summary(&r)?,
                }
            }
            Stage::Filter => {
                require(&art.records, Stage::Extract)?;
                let r = run_filter(&art.records, &rules, &art.kept, &art.filter_report)?;
                StageReport {
                    stage,
                    errors: vec![],
                    degraded: false,
                    summary: summary(&r)?,
                }
            }
            Stage::Build => {
                require(&art.kept, Stage::Filter)?;
                let m = run_build(
                    &art.kept,
                    &cfg.assemble_config(),
                    cfg.ratios,
                    cfg.seed,
                    cfg.stratify_by_repo,
                    &art.dataset,
                )?;
                StageReport {
                    stage,
                    errors: vec![],
                    degraded: false,
                    summary: summary(&m)?,
                }
            }
        };
        tracing::info!(
            errors = report.errors.len(),
            degraded = report.degraded,
            "stage finished"
        );
        reports.push(report);
    }
    let status = if reports.iter().any(|r| !r.errors.is_empty()) {
        ExitStatus::Runtime
    } else if reports.iter().any(|r| r.degraded) {
        ExitStatus::Degraded
    } else {
        ExitStatus::Ok
    };
    Ok(PipelineOutcome { reports, status })
}
