//! Generation, scoring and comparison of documentation-generation runs.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetEntry;
use crate::error::{Error, Result};
use crate::jsonl::{read_json, read_jsonl, write_atomic, write_json};
use crate::metrics::{score_pairs, MetricConfig, MetricReport, ScorePair};
use crate::prompting::PromptLine;

/// Failure share above which a run is marked degraded.
pub const DEGRADED_FAILURE_RATE: f64 = 0.10;
/// Outputs must cover at least this share of references to be scored.
pub const MIN_COVERAGE: f64 = 0.90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterKind {
    HttpEndpoint,
    ExternalCommand,
    OutputsFile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorAdapter {
    pub kind: AdapterKind,
    pub location: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub concurrency: usize,
}

impl GeneratorAdapter {
    pub fn new(kind: AdapterKind, location: impl Into<String>) -> Self {
        GeneratorAdapter {
            kind,
            location: location.into(),
            timeout_secs: 60,
            max_retries: 3,
            concurrency: 4,
        }
    }

    /// Parses `file:<path>`, `cmd:<shell command>` or an `http(s)://` URL.
    /// A bare path is read as an outputs file.
    pub fn parse(spec: &str) -> Result<Self> {
        let adapter = if let Some(p) = spec.strip_prefix("file:") {
            Self::new(AdapterKind::OutputsFile, p)
        } else if let Some(c) = spec.strip_prefix("cmd:") {
            Self::new(AdapterKind::ExternalCommand, c)
        } else if spec.starts_with("http://") || spec.starts_with("https://") {
            Self::new(AdapterKind::HttpEndpoint, spec)
        } else {
            Self::new(AdapterKind::OutputsFile, spec)
        };
        adapter.validate()?;
        Ok(adapter)
    }

    /// Checks configuration before any request is made.
    pub fn validate(&self) -> Result<()> {
        if self.location.trim().is_empty() {
            return Err(Error::Config(
                "generator adapter has an empty location".into(),
            ));
        }
        if self.concurrency == 0 || self.timeout_secs == 0 {
            return Err(Error::Config(
                "generator concurrency and timeout must be positive".into(),
            ));
        }
        match self.kind {
            AdapterKind::OutputsFile if !Path::new(&self.location).is_file() => Err(Error::Config(
                format!("outputs file {} does not exist", self.location),
            )),
            AdapterKind::HttpEndpoint
                if !(self.location.starts_with("http://")
                    || self.location.starts_with("https://")) =>
            {
                Err(Error::Config(format!(
                    "not an http(s) URL: {}",
                    self.location
                )))
            }
            _ => Ok(()),
        }
    }
}

impl FromStr for GeneratorAdapter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedText {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    /// One entry per prompt; failed generations are empty strings.
    pub outputs: BTreeMap<String, String>,
    pub failures: Vec<GenerationFailure>,
    pub degraded: bool,
}

pub fn run_generation(prompts: &[PromptLine], adapter: &GeneratorAdapter) -> Result<Generation> {
    adapter.validate()?;
    let results: Vec<(String, std::result::Result<String, String>)> = match adapter.kind {
        AdapterKind::OutputsFile => {
            let table: HashMap<String, String> =
                read_jsonl::<GeneratedText>(Path::new(&adapter.location))?
                    .into_iter()
                    .map(|g| (g.id, g.text))
                    .collect();
            prompts
                .iter()
                .map(|p| {
                    let r = table
                        .get(&p.id)
                        .cloned()
                        .ok_or_else(|| "no output in file".to_string());
                    (p.id.clone(), r)
                })
                .collect()
        }
        AdapterKind::ExternalCommand | AdapterKind::HttpEndpoint => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(adapter.concurrency)
                .build()
                .map_err(|e| Error::Runtime(format!("cannot start generator pool: {e}")))?;
            let agent = http_agent(adapter);
            pool.install(|| {
                prompts
                    .par_iter()
                    .map(|p| {
                        let r = match adapter.kind {
                            AdapterKind::HttpEndpoint => http_generate(&agent, adapter, p),
                            _ => command_generate(adapter, p),
                        };
                        (p.id.clone(), r)
                    })
                    .collect()
            })
        }
    };
    let mut outputs = BTreeMap::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(text) => {
                outputs.insert(id, text);
            }
            Err(reason) => {
                tracing::warn!(%id, %reason, "generation failed");
                failures.push(GenerationFailure {
                    id: id.clone(),
                    reason,
                });
                outputs.insert(id, String::new());
            }
        }
    }
    let degraded =
        !prompts.is_empty() && failures.len() as f64 / prompts.len() as f64 > DEGRADED_FAILURE_RATE;
    Ok(Generation {
        outputs,
        failures,
        degraded,
    })
}

fn http_agent(adapter: &GeneratorAdapter) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(adapter.timeout_secs)))
        .build()
        .into()
}

fn http_generate(
    agent: &ureq::Agent,
    adapter: &GeneratorAdapter,
    p: &PromptLine,
) -> std::result::Result<String, String> {
    let mut last = String::new();
    for attempt in 0..=adapter.max_retries {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(100 << (attempt - 1).min(6)));
        }
        let resp = agent.post(&adapter.location).send_json(p);
        match resp {
            Ok(mut r) => match r.body_mut().read_json::<GeneratedText>() {
                Ok(g) if g.id == p.id => return Ok(g.text),
                Ok(g) => return Err(format!("response id {} does not match request", g.id)),
                Err(e) => return Err(format!("malformed response: {e}")),
            },
            Err(ureq::Error::StatusCode(code)) if code < 500 && code != 429 => {
                return Err(format!("http status {code}"));
            }
            Err(e) => last = e.to_string(),
        }
    }
    Err(format!(
        "gave up after {} attempts: {last}",
        adapter.max_retries + 1
    ))
}

/// Runs the command once per prompt with the prompt on stdin; stdout is the
/// generation. The prompt id is exported as `FORGE_PROMPT_ID`.
fn command_generate(
    adapter: &GeneratorAdapter,
    p: &PromptLine,
) -> std::result::Result<String, String> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&adapter.location)
        .env("FORGE_PROMPT_ID", &p.id)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| format!("cannot spawn generator: {e}"))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let prompt = p.prompt.clone();
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(prompt.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout.read_to_end(&mut buf);
        buf
    });
    let deadline = Instant::now() + Duration::from_secs(adapter.timeout_secs);
    let status = loop {
        match child.try_wait() {
            Ok(Some(s)) => break s,
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Err("generator timed out".into());
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => return Err(e.to_string()),
        }
    };
    let _ = writer.join();
    let out = reader.join().unwrap_or_default();
    if !status.success() {
        return Err(format!("generator exited with {status}"));
    }
    Ok(String::from_utf8_lossy(&out).into_owned())
}

/// First `/** … */` block in a raw generation, or the whole text.
pub fn extract_javadoc_block(text: &str) -> &str {
    if let Some(start) = text.find("/**") {
        if let Some(len) = text[start + 3..].find("*/") {
            return &text[start..start + 3 + len + 2];
        }
    }
    text
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Zero,
    One,
    Few,
    Finetuned,
}

impl Setting {
    pub const ALL: [Setting; 4] = [
        Setting::Zero,
        Setting::One,
        Setting::Few,
        Setting::Finetuned,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Zero => "zero",
            Setting::One => "one",
            Setting::Few => "few",
            Setting::Finetuned => "finetuned",
        }
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown setting `{s}` (zero|one|few|finetuned)")))
    }
}

/// Splits a `model:setting` run label.
pub fn parse_run_label(label: &str) -> Result<(String, Setting)> {
    let (model, setting) = label
        .rsplit_once(':')
        .ok_or_else(|| Error::Config(format!("run label `{label}` is not model:setting")))?;
    if model.is_empty() {
        return Err(Error::Config(format!("run label `{label}` has no model")));
    }
    Ok((model.to_string(), setting.parse()?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub model_label: String,
    pub setting: Setting,
    pub outputs: BTreeMap<String, String>,
    #[serde(default)]
    pub failures: Vec<GenerationFailure>,
    #[serde(default)]
    pub degraded: bool,
    /// Whether outputs are reduced to their first Javadoc block before scoring.
    #[serde(default = "yes")]
    pub postprocess: bool,
    #[serde(default)]
    pub report: Option<MetricReport>,
    #[serde(default)]
    pub started_at: String,
    #[serde(default)]
    pub finished_at: String,
}

fn yes() -> bool {
    true
}

/// Current UTC time as RFC 3339 with millisecond precision.
pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunRecord {
    pub fn new(model_label: &str, setting: Setting, generation: Generation) -> Self {
        let stamp = timestamp();
        RunRecord {
            run_id: run_id(model_label, setting),
            model_label: model_label.to_string(),
            setting,
            outputs: generation.outputs,
            failures: generation.failures,
            degraded: generation.degraded,
            postprocess: true,
            report: None,
            started_at: stamp.clone(),
            finished_at: stamp,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub fn run_id(model_label: &str, setting: Setting) -> String {
    let safe: String = model_label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}__{}", setting.as_str())
}

/// Scores a run against reference entries in id order. Missing outputs count
/// as empty candidates.
pub fn score_run(
    run: &RunRecord,
    references: &[DatasetEntry],
    cfg: &MetricConfig,
) -> Result<MetricReport> {
    if references.is_empty() {
        return Err(Error::Validation("no references to score against".into()));
    }
    let covered = references
        .iter()
        .filter(|r| run.outputs.contains_key(&r.id))
        .count();
    if covered == 0 {
        return Err(Error::Validation(format!(
            "run {} shares no ids with the references",
            run.run_id
        )));
    }
    let coverage = covered as f64 / references.len() as f64;
    if coverage < MIN_COVERAGE {
        return Err(Error::Validation(format!(
            "run {} covers {covered}/{} references ({:.1}%), below {:.0}%",
            run.run_id,
            references.len(),
            coverage * 100.0,
            MIN_COVERAGE * 100.0
        )));
    }
    let mut refs: Vec<&DatasetEntry> = references.iter().collect();
    refs.sort_by(|a, b| a.id.cmp(&b.id));
    let pairs: Vec<ScorePair> = refs
        .iter()
        .map(|r| {
            let raw = run.outputs.get(&r.id).map(String::as_str).unwrap_or("");
            let cand = if run.postprocess {
                extract_javadoc_block(raw)
            } else {
                raw
            };
            ScorePair::new(cand, r.documentation.as_str())
        })
        .collect();
    score_pairs(&pairs, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub setting: Setting,
    pub bleu: f64,
    pub r1: f64,
    pub r2: f64,
    pub rl: f64,
    pub rlsum: f64,
    /// Highest BLEU within its setting.
    pub best: bool,
    pub run_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// Rows grouped by setting then model. For duplicate (model, setting) pairs
/// the latest-finished run wins; ties go to the later one in `runs`.
pub fn compare_runs(runs: &[RunRecord]) -> Result<ComparisonTable> {
    if runs.is_empty() {
        return Err(Error::Validation("no runs to compare".into()));
    }
    let mut latest: BTreeMap<(Setting, &str), &RunRecord> = BTreeMap::new();
    for run in runs {
        if run.report.is_none() {
            return Err(Error::Validation(format!(
                "run {} has not been scored",
                run.run_id
            )));
        }
        let key = (run.setting, run.model_label.as_str());
        if let Some(prev) = latest.get(&key) {
            tracing::warn!(model = %run.model_label, setting = run.setting.as_str(), "duplicate run; latest wins");
            if prev.finished_at > run.finished_at {
                continue;
            }
        }
        latest.insert(key, run);
    }
    let mut rows: Vec<ComparisonRow> = latest
        .values()
        .map(|run| {
            let r = run.report.as_ref().expect("checked above");
            ComparisonRow {
                model: run.model_label.clone(),
                setting: run.setting,
                bleu: r.bleu,
                r1: r.r1,
                r2: r.r2,
                rl: r.rl,
                rlsum: r.rlsum,
                best: false,
                run_id: run.run_id.clone(),
            }
        })
        .collect();
    for setting in Setting::ALL {
        let best = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.setting == setting)
            .max_by(|a, b| a.1.bleu.total_cmp(&b.1.bleu).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i);
        if let Some(i) = best {
            rows[i].best = true;
        }
    }
    Ok(ComparisonTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressionPoint {
    pub model: String,
    pub setting_index: usize,
    pub bleu: f64,
    pub rlsum: f64,
}

impl ComparisonTable {
    /// Per-model series across settings, ordered zero → finetuned.
    pub fn progression(&self) -> BTreeMap<String, Vec<ProgressionPoint>> {
        let mut out: BTreeMap<String, Vec<ProgressionPoint>> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.model.clone())
                .or_default()
                .push(ProgressionPoint {
                    model: r.model.clone(),
                    setting_index: r.setting.index(),
                    bleu: r.bleu,
                    rlsum: r.rlsum,
                });
        }
        for series in out.values_mut() {
            series.sort_by_key(|p| p.setting_index);
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Setting | Model | BLEU | R1 | R2 | RL | RLsum |\n|---|---|---:|---:|---:|---:|---:|\n");
        for r in &self.rows {
            let bleu = if r.best {
                format!("**{:.4}**", r.bleu)
            } else {
                format!("{:.4}", r.bleu)
            };
            s.push_str(&format!(
                "| {} | {} | {} | {:.4} | {:.4} | {:.4} | {:.4} |\n",
                r.setting.as_str(),
                r.model,
                bleu,
                r.r1,
                r.r2,
                r.rl,
                r.rlsum
            ));
        }
        s.push_str("\nBest BLEU per setting in bold. Generations were reduced to their first Javadoc block before scoring unless the run disabled it.\n");
        s
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Runtime(e.to_string()))
    }

    pub fn progression_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for series in self.progression().values() {
            for p in series {
                w.serialize(p).map_err(csv_err)?;
            }
        }
        w.into_inner().map_err(|e| Error::Runtime(e.to_string()))
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let rows = csv::Reader::from_reader(bytes)
            .deserialize()
            .collect::<std::result::Result<Vec<ComparisonRow>, _>>()
            .map_err(csv_err)?;
        Ok(ComparisonTable { rows })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Runtime(format!("csv: {e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Progression,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [
        ReportFormat::Markdown,
        ReportFormat::Csv,
        ReportFormat::Progression,
    ];
}

/// Writes the requested formats next to `out` (`report.md` → `report.csv`,
/// `report_progression.csv`). Returns the paths written.
pub fn emit_report(
    table: &ComparisonTable,
    out: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    if table.rows.is_empty() {
        return Err(Error::Validation("comparison table is empty".into()));
    }
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let mut written = Vec::new();
    for f in formats {
        let (path, bytes) = match f {
            ReportFormat::Markdown => (out.with_extension("md"), table.to_markdown().into_bytes()),
            ReportFormat::Csv => (out.with_extension("csv"), table.to_csv()?),
            ReportFormat::Progression => (
                out.with_file_name(format!("{stem}_progression.csv")),
                table.progression_csv()?,
            ),
        };
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}
