//! Subcommand handlers. Each prints a JSON summary on stdout and returns the
//! process exit status.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use forge_core::annotation::{
    agreement_matrix, effective_decisions, fleiss_kappa, server, CategorySet, Decision,
    DecisionLog, GoldLabel, Phase, ReviewPolicy, ReviewService, Session,
};
use forge_core::dataset::{
    self, read_dataset, read_split, AssembleConfig, DatasetEntry, SPLIT_NAMES,
};
use forge_core::filter::RuleSet;
use forge_core::harness::{
    compare_runs, emit_report, parse_run_label, run_generation, score_run, timestamp,
    GeneratedText, Generation, GeneratorAdapter, ReportFormat, RunRecord, Setting, MIN_COVERAGE,
};
use forge_core::ingest::{DiscoverOptions, RepoManifest};
use forge_core::jsonl::{read_json, read_jsonl, write_json};
use forge_core::lora::{
    lora_params, save_training_config, shipped_specs, verify_table3, ArchitectureSpec, LoraConfig,
    TrainingConfig,
};
use forge_core::metrics::{BleuMode, MetricConfig, RougeMode, TokenizerConfig};
use forge_core::pipeline::{
    run_build, run_extract, run_filter, run_ingest, run_pipeline, run_review_apply, ExitStatus,
    PipelineConfig, Stage,
};
use forge_core::prompting::{
    load_exemplar_ids, propose_exemplars, render_run, write_prompts, PromptLine, PromptTemplate,
    ShotConfig, ShotMode, TrainIndex,
};
use forge_core::Error;
use serde::Serialize;
use serde_json::json;

use crate::{
    AgreementArgs, AnnotateCommand, ApplyArgs, AssignArgs, BuildArgs, Command, CompareArgs,
    EvalArgs, ExtractArgs, FilterArgs, IngestArgs, LoraArgs, MetricArgs, PipelineArgs, PromptsArgs,
    ScoreArgs, ServeArgs,
};

pub fn run(command: Command) -> Result<ExitStatus> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Extract(a) => extract(a),
        Command::Filter(a) => filter(a),
        Command::Build(a) => build(a),
        Command::Annotate(AnnotateCommand::Assign(a)) => assign(a),
        Command::Annotate(AnnotateCommand::Serve(a)) => serve(a),
        Command::Annotate(AnnotateCommand::Agreement(a)) => agreement(a),
        Command::Annotate(AnnotateCommand::Apply(a)) => apply(a),
        Command::Prompts(a) => prompts(a),
        Command::Eval(a) => eval(a),
        Command::Score(a) => score(a),
        Command::Compare(a) => compare(a),
        Command::LoraParams(a) => lora(a),
        Command::Pipeline(a) => pipeline(a),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // a closed reader (e.g. `| head`) is not a failure
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    Error::Config(msg.into()).into()
}

fn parse_ratios(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| config_err(format!("bad ratios `{s}`: {e}")))?;
    let ratios: [f64; 3] = parts
        .try_into()
        .map_err(|_| config_err(format!("ratios `{s}` must have three values")))?;
    dataset::validate_ratios(ratios)?;
    Ok(ratios)
}

fn inventory_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "jsonl") {
        out.to_path_buf()
    } else {
        out.join("inventory.jsonl")
    }
}

/// Manifest copy with absolute roots, kept beside the inventory so that
/// `extract` can find the sources again.
fn manifest_sidecar(inventory: &Path) -> PathBuf {
    let stem = inventory
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("inventory");
    inventory.with_file_name(format!("{stem}.manifest.json"))
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.with_file_name(name)
}

fn ingest(a: IngestArgs) -> Result<ExitStatus> {
    let mut manifest = RepoManifest::load(&a.manifest)?;
    for repo in &mut manifest.repos {
        repo.root = fs::canonicalize(&repo.root).map_err(|e| Error::Manifest {
            repo: repo.name.clone(),
            message: format!("cannot resolve root {}: {e}", repo.root.display()),
        })?;
    }
    let out = inventory_path(&a.out);
    let report = run_ingest(&manifest, &DiscoverOptions { exclude: a.exclude }, &out)?;
    write_json(&manifest_sidecar(&out), &manifest)?;
    tracing::info!(files = report.files, kept = report.kept, "ingest finished");
    print_json(&report)?;
    Ok(ExitStatus::Ok)
}

fn extract(a: ExtractArgs) -> Result<ExitStatus> {
    let manifest_path = a.manifest.unwrap_or_else(|| manifest_sidecar(&a.inventory));
    if !manifest_path.exists() {
        return Err(config_err(format!(
            "no manifest at {}; pass --manifest",
            manifest_path.display()
        )));
    }
    let manifest = RepoManifest::load(&manifest_path)?;
    let report_path = a
        .report
        .unwrap_or_else(|| sibling(&a.out, "extract_report.json"));
    let report = run_extract(&manifest, &a.inventory, &a.out, &report_path)?;
    tracing::info!(
        records = report.records,
        orphans = report.orphans,
        "extract finished"
    );
    print_json(&json!({
        "files": report.files,
        "records": report.records,
        "orphans": report.orphans,
        "parse_degraded": report.parse_degraded,
        "errors": report.errors,
        "report": report_path,
    }))?;
    Ok(if !report.errors.is_empty() {
        ExitStatus::Runtime
    } else if !report.parse_degraded.is_empty() {
        ExitStatus::Degraded
    } else {
        ExitStatus::Ok
    })
}

fn filter(a: FilterArgs) -> Result<ExitStatus> {
    let rules = match &a.rules {
        Some(p) => RuleSet::load(p)?,
        None => RuleSet::default(),
    };
    let report_path = a
        .report
        .unwrap_or_else(|| sibling(&a.out, "filter_report.json"));
    let report = run_filter(&a.input, &rules, &a.out, &report_path)?;
    tracing::info!(input = report.input, kept = report.kept, "filter finished");
    print_json(&json!({
        "input": report.input,
        "kept": report.kept,
        "rejected": report.rejected,
        "duplicates_dropped": report.duplicates_dropped,
        "flagged_records": report.flagged_records,
        "rule_counts": report.rule_counts,
        "flag_counts": report.flag_counts,
    }))?;
    Ok(ExitStatus::Ok)
}

fn build(a: BuildArgs) -> Result<ExitStatus> {
    let ratios = parse_ratios(&a.ratios)?;
    let cfg = if a.include_types {
        AssembleConfig::with_types()
    } else {
        AssembleConfig::default()
    };
    let manifest = run_build(&a.input, &cfg, ratios, a.seed, a.stratify_by_repo, &a.out)?;
    print_json(&manifest)?;
    Ok(ExitStatus::Ok)
}

fn dataset_ids(dir: &Path, split: Option<&str>) -> Result<Vec<String>> {
    let entries = match split {
        Some(name) => read_split(dir, name)?,
        None => read_dataset(dir)?.0,
    };
    Ok(entries.into_iter().map(|e| e.id).collect())
}

fn assign(a: AssignArgs) -> Result<ExitStatus> {
    let mut items = dataset_ids(&a.dataset, a.split.as_deref())?;
    let gold: Option<BTreeMap<String, GoldLabel>> = a.gold.as_deref().map(read_json).transpose()?;
    if let Some(g) = &gold {
        // calibration covers exactly the gold-labelled items
        let labelled: HashSet<&String> = g.keys().collect();
        items.retain(|id| labelled.contains(id));
    }
    let slots = items.len() * a.raters_per_item;
    let per = match a.per_annotator {
        Some(p) => p,
        None if a.annotators.is_empty() || !slots.is_multiple_of(a.annotators.len()) => {
            return Err(config_err(format!(
                "{slots} rating slots do not divide evenly among {} annotators; pass --per-annotator",
                a.annotators.len()
            )))
        }
        None => slots / a.annotators.len(),
    };
    let assignment = forge_core::annotation::assign_samples(
        &items,
        &a.annotators,
        per,
        a.raters_per_item,
        a.seed,
    )?;
    let session = Session {
        id: a.id,
        annotators: a.annotators,
        items,
        assignment,
        phase: if gold.is_some() {
            Phase::Calibration
        } else {
            Phase::Review
        },
        gold,
    };
    session.validate()?;
    write_json(&a.out, &session)?;
    print_json(&json!({
        "session": session.id,
        "items": session.items.len(),
        "annotators": session.annotators.len(),
        "per_annotator": per,
        "phase": session.phase,
    }))?;
    Ok(ExitStatus::Ok)
}

fn decisions_path(dataset: &Path, explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| dataset.join("decisions.jsonl"))
}

fn read_decisions(path: &Path) -> Result<Vec<Decision>> {
    if path.exists() {
        Ok(read_jsonl(path)?)
    } else {
        Err(config_err(format!(
            "decision log {} does not exist",
            path.display()
        )))
    }
}

fn serve(a: ServeArgs) -> Result<ExitStatus> {
    let (entries, _) = read_dataset(&a.dataset)?;
    let sessions = a
        .sessions
        .iter()
        .map(|p| Session::load(p))
        .collect::<forge_core::Result<Vec<_>>>()?;
    let log = DecisionLog::open(&decisions_path(&a.dataset, a.decisions))?;
    let svc = Arc::new(ReviewService::new(sessions, entries, log)?);
    if let Some(dir) = &a.static_dir {
        if !dir.is_dir() {
            return Err(config_err(format!(
                "static directory {} does not exist",
                dir.display()
            )));
        }
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting async runtime")?;
    runtime.block_on(server::serve_api(
        svc,
        SocketAddr::new(a.host, a.port),
        a.static_dir.as_deref(),
    ))?;
    Ok(ExitStatus::Ok)
}

fn agreement(a: AgreementArgs) -> Result<ExitStatus> {
    let session = Session::load(&a.session)?;
    let categories: CategorySet = a.categories.parse()?;
    let decisions = effective_decisions(&read_decisions(&a.decisions)?);
    let view = match agreement_matrix(&session, &decisions, categories) {
        Some(m) => json!({
            "session": session.id,
            "kappa": fleiss_kappa(&m)?,
            "items": m.rows.len(),
            "raters": m.n,
        }),
        None => json!({ "session": session.id, "kappa": null, "items": 0, "raters": 0 }),
    };
    print_json(&view)?;
    Ok(ExitStatus::Ok)
}

fn apply(a: ApplyArgs) -> Result<ExitStatus> {
    let policy: ReviewPolicy = a.policy.parse()?;
    let decisions = read_decisions(&decisions_path(&a.dataset, a.decisions))?;
    let manifest = run_review_apply(&a.dataset, &decisions, policy, &a.out)?;
    print_json(&manifest)?;
    Ok(ExitStatus::Ok)
}

fn prompts(a: PromptsArgs) -> Result<ExitStatus> {
    if !SPLIT_NAMES.contains(&a.split.as_str()) {
        return Err(config_err(format!("unknown split `{}`", a.split)));
    }
    let mode: ShotMode = a.mode.parse()?;
    let template = match &a.template {
        Some(p) => PromptTemplate::load(p)?,
        None => PromptTemplate::default(),
    };
    let entries = read_split(&a.dataset, &a.split)?;
    let train = if mode == ShotMode::Zero {
        Vec::new()
    } else {
        read_split(&a.dataset, "train")?
    };
    let ids = match (&a.exemplars, mode) {
        (_, ShotMode::Zero) => Vec::new(),
        (Some(p), _) => load_exemplar_ids(p)?,
        (None, _) => {
            let ids = propose_exemplars(&train, mode.shots());
            tracing::info!(?ids, "no exemplar file given; using proposed exemplars");
            ids
        }
    };
    let shots = ShotConfig::new(mode, ids)?;
    let lines = render_run(&entries, &template, &shots, &TrainIndex::new(&train))?;
    write_prompts(&a.out, &lines)?;
    print_json(&json!({
        "split": a.split,
        "mode": mode.as_str(),
        "exemplars": shots.exemplar_ids,
        "prompts": lines.len(),
        "out": a.out,
    }))?;
    Ok(ExitStatus::Ok)
}

fn metric_config(m: &MetricArgs) -> Result<MetricConfig> {
    let rouge_mode = match m.rouge_mode.as_str() {
        "recall" => RougeMode::Recall,
        "f1" => RougeMode::F1,
        other => {
            return Err(config_err(format!(
                "unknown rouge mode `{other}` (recall|f1)"
            )))
        }
    };
    let bleu_mode = match m.bleu_mode.as_str() {
        "corpus" => BleuMode::Corpus,
        "sentence_smoothed" => BleuMode::SentenceSmoothed,
        other => {
            return Err(config_err(format!(
                "unknown bleu mode `{other}` (corpus|sentence_smoothed)"
            )))
        }
    };
    Ok(MetricConfig {
        tokenizer: TokenizerConfig {
            lowercase: !m.case_sensitive,
            strip_javadoc: !m.keep_comment_markup,
        },
        rouge_mode,
        bleu_mode,
        ..MetricConfig::default()
    })
}

fn eval(a: EvalArgs) -> Result<ExitStatus> {
    let cfg = metric_config(&a.metric)?;
    let (model, setting) = parse_run_label(&a.run_label)?;
    let mut adapter = GeneratorAdapter::parse(&a.adapter)?;
    if let Some(t) = a.timeout_secs {
        adapter.timeout_secs = t;
    }
    if let Some(r) = a.max_retries {
        adapter.max_retries = r;
    }
    if let Some(c) = a.concurrency {
        adapter.concurrency = c;
    }
    adapter.validate()?;
    let prompts: Vec<PromptLine> = read_jsonl(&a.prompts)?;
    let refs: Vec<DatasetEntry> = read_jsonl(&a.refs)?;

    let started = timestamp();
    let generation = run_generation(&prompts, &adapter)?;
    let mut run = RunRecord::new(&model, setting, generation);
    run.started_at = started;
    run.postprocess = !a.no_postprocess;
    let scored = score_run(&run, &refs, &cfg);
    run.report = scored.as_ref().ok().cloned();
    let path = a.out.join(format!("{}.json", run.run_id));
    run.save(&path)?;
    let report = scored.with_context(|| format!("run saved unscored to {}", path.display()))?;
    if run.degraded {
        tracing::warn!(failures = run.failures.len(), "run degraded");
    }
    print_json(&json!({
        "run_id": run.run_id,
        "path": path,
        "failures": run.failures.len(),
        "degraded": run.degraded,
        "report": report,
    }))?;
    Ok(if run.degraded {
        ExitStatus::Degraded
    } else {
        ExitStatus::Ok
    })
}

fn score(a: ScoreArgs) -> Result<ExitStatus> {
    let cfg = metric_config(&a.metric)?;
    let refs: Vec<DatasetEntry> = read_jsonl(&a.refs)?;
    let cands: Vec<GeneratedText> = read_jsonl(&a.cands)?;
    let mut outputs = BTreeMap::new();
    for c in cands {
        if outputs.insert(c.id.clone(), c.text).is_some() {
            return Err(Error::Validation(format!("candidate id {} appears twice", c.id)).into());
        }
    }
    let mut run = RunRecord::new(
        "score",
        Setting::Zero,
        Generation {
            outputs,
            failures: Vec::new(),
            degraded: false,
        },
    );
    run.postprocess = a.postprocess;
    let report = score_run(&run, &refs, &cfg)?;
    let doc = json!({
        "bleu": report.bleu,
        "r1": report.r1,
        "r2": report.r2,
        "rl": report.rl,
        "rlsum": report.rlsum,
        "n_pairs": report.n_pairs,
        "degenerate_pairs": report.degenerate_pairs,
        "config": {
            "tokenizer": cfg.tokenizer,
            "rouge_mode": cfg.rouge_mode,
            "bleu_mode": cfg.bleu_mode,
            "max_n": cfg.max_n,
            "postprocess": a.postprocess,
            "min_coverage": MIN_COVERAGE,
        },
    });
    write_json(&a.out, &doc)?;
    print_json(&doc)?;
    Ok(ExitStatus::Ok)
}

fn compare(a: CompareArgs) -> Result<ExitStatus> {
    let formats = a
        .formats
        .iter()
        .map(|f| match f.as_str() {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "progression" => Ok(ReportFormat::Progression),
            other => Err(config_err(format!(
                "unknown report format `{other}` (md|csv|progression)"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    let runs = a
        .runs
        .iter()
        .map(|p| RunRecord::load(p))
        .collect::<forge_core::Result<Vec<_>>>()?;
    let table = compare_runs(&runs)?;
    let written = emit_report(&table, &a.out, &formats)?;
    print_json(&json!({ "rows": table.rows.len(), "written": written }))?;
    Ok(ExitStatus::Ok)
}

fn lora(a: LoraArgs) -> Result<ExitStatus> {
    let mut cfg = LoraConfig::with_rank(a.rank);
    if !a.targets.is_empty() {
        cfg.targets = a.targets.clone();
    }
    cfg.validate()?;
    if let Some(path) = &a.training_config {
        let tc = TrainingConfig {
            lora: cfg.clone(),
            ..Default::default()
        };
        save_training_config(path, &tc)?;
    }
    let mut status = ExitStatus::Ok;
    if a.verify_table3 {
        let rows = verify_table3(&shipped_specs(), &cfg)?;
        for r in &rows {
            tracing::info!(model = %r.model, got = r.got, expected = ?r.expected, pass = r.pass, "lora count");
        }
        if rows.iter().any(|r| !r.pass) {
            status = ExitStatus::Validation;
        }
        print_json(
            &json!({ "rank": cfg.rank, "all_pass": status == ExitStatus::Ok, "models": rows }),
        )?;
    }
    if !a.spec.is_empty() {
        let counts = a
            .spec
            .iter()
            .map(|p| {
                let spec = ArchitectureSpec::load(p)?;
                let params = lora_params(&spec, &cfg)?;
                Ok(json!({ "model": spec.model_label, "rank": cfg.rank, "params": params }))
            })
            .collect::<forge_core::Result<Vec<_>>>()?;
        print_json(&counts)?;
    }
    Ok(status)
}

fn pipeline(a: PipelineArgs) -> Result<ExitStatus> {
    let mut cfg = PipelineConfig::load(&a.config)?;
    if let Some(m) = a.manifest {
        cfg.manifest = m;
    }
    if let Some(r) = a.rules {
        cfg.rules = Some(r);
    }
    if let Some(o) = a.out {
        cfg.out = o;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(r) = &a.ratios {
        cfg.ratios = parse_ratios(r)?;
    }
    if !a.exclude.is_empty() {
        cfg.exclude = a.exclude;
    }
    cfg.stratify_by_repo |= a.stratify_by_repo;
    cfg.include_types |= a.include_types;
    let stages = if a.stages.is_empty() {
        vec![Stage::Ingest, Stage::Extract, Stage::Filter, Stage::Build]
    } else {
        a.stages
            .iter()
            .map(|s| s.parse())
            .collect::<forge_core::Result<Vec<Stage>>>()?
    };
    let outcome = run_pipeline(&cfg, &stages)?;
    print_json(&outcome)?;
    Ok(outcome.status)
}
