//! Prompt rendering for zero-, one- and few-shot documentation generation.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetEntry;
use crate::error::{Error, Result};
use crate::jsonl::{read_json, to_jsonl_bytes, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextField {
    Package,
    EnclosingClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptTemplate {
    pub role_preamble: String,
    pub instruction: String,
    pub input_marker: String,
    pub output_marker: String,
    pub context_fields: Vec<ContextField>,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            role_preamble: "You are a senior Java developer.".into(),
            instruction: "Write the Javadoc comment for the following code.".into(),
            input_marker: "### Code".into(),
            output_marker: "### Javadoc".into(),
            context_fields: vec![ContextField::Package, ContextField::EnclosingClass],
        }
    }
}

impl PromptTemplate {
    pub fn load(path: &Path) -> Result<Self> {
        let t: PromptTemplate = read_json(path)?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_marker.trim().is_empty() || self.output_marker.trim().is_empty() {
            return Err(Error::Config("template markers must be non-empty".into()));
        }
        if self.input_marker == self.output_marker {
            return Err(Error::Config(
                "template input and output markers must differ".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotMode {
    Zero,
    One,
    Few,
}

impl ShotMode {
    pub fn shots(self) -> usize {
        match self {
            ShotMode::Zero => 0,
            ShotMode::One => 1,
            ShotMode::Few => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ShotMode::Zero => "zero",
            ShotMode::One => "one",
            ShotMode::Few => "few",
        }
    }
}

impl FromStr for ShotMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(ShotMode::Zero),
            "one" => Ok(ShotMode::One),
            "few" => Ok(ShotMode::Few),
            other => Err(Error::Config(format!(
                "unknown shot mode `{other}` (zero|one|few)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotConfig {
    pub mode: ShotMode,
    pub exemplar_ids: Vec<String>,
}

impl ShotConfig {
    pub fn new(mode: ShotMode, exemplar_ids: Vec<String>) -> Result<Self> {
        let cfg = ShotConfig { mode, exemplar_ids };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn zero() -> Self {
        ShotConfig {
            mode: ShotMode::Zero,
            exemplar_ids: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.exemplar_ids.len() != self.mode.shots() {
            return Err(Error::Config(format!(
                "{}-shot mode needs exactly {} exemplar ids, got {}",
                self.mode.as_str(),
                self.mode.shots(),
                self.exemplar_ids.len()
            )));
        }
        Ok(())
    }
}

/// Reads exemplar ids from a JSON array (or `{"ids": [...]}`) file.
pub fn load_exemplar_ids(path: &Path) -> Result<Vec<String>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Ids {
        List(Vec<String>),
        Wrapped { ids: Vec<String> },
    }
    Ok(match read_json::<Ids>(path)? {
        Ids::List(v) | Ids::Wrapped { ids: v } => v,
    })
}

/// Lookup over the train split; exemplars may only come from here.
pub struct TrainIndex<'a> {
    by_id: HashMap<&'a str, &'a DatasetEntry>,
}

impl<'a> TrainIndex<'a> {
    pub fn new(train: &'a [DatasetEntry]) -> Self {
        TrainIndex {
            by_id: train.iter().map(|e| (e.id.as_str(), e)).collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&'a DatasetEntry> {
        self.by_id.get(id).copied()
    }

    fn resolve(&self, shots: &ShotConfig) -> Result<Vec<&'a DatasetEntry>> {
        shots.validate()?;
        shots
            .exemplar_ids
            .iter()
            .map(|id| {
                self.get(id).ok_or_else(|| {
                    Error::Validation(format!("exemplar {id} is not in the train split"))
                })
            })
            .collect()
    }
}

fn input_block(out: &mut String, entry: &DatasetEntry, template: &PromptTemplate) {
    out.push_str(&template.input_marker);
    out.push('\n');
    for field in &template.context_fields {
        match field {
            ContextField::Package if !entry.package.is_empty() => {
                out.push_str(&format!("Package: {}\n", entry.package));
            }
            ContextField::EnclosingClass if !entry.enclosing_class.is_empty() => {
                out.push_str(&format!("Class: {}\n", entry.enclosing_class));
            }
            _ => {}
        }
    }
    out.push_str("```java\n");
    out.push_str(&entry.code);
    if !entry.code.ends_with('\n') {
        out.push('\n');
    }
    out.push_str("```\n");
}

fn render_with(
    entry: &DatasetEntry,
    template: &PromptTemplate,
    exemplars: &[&DatasetEntry],
) -> Result<String> {
    if exemplars.iter().any(|e| e.id == entry.id) {
        return Err(Error::Validation(format!(
            "leakage: entry {} is one of its own exemplars",
            entry.id
        )));
    }
    let mut out = String::new();
    out.push_str(&template.role_preamble);
    out.push('\n');
    out.push_str(&template.instruction);
    out.push_str("\n\n");
    for ex in exemplars {
        input_block(&mut out, ex, template);
        out.push_str(&template.output_marker);
        out.push('\n');
        out.push_str(&ex.documentation);
        out.push_str("\n\n");
    }
    input_block(&mut out, entry, template);
    let own_doc = entry.documentation.trim();
    if !own_doc.is_empty() && out.contains(own_doc) {
        return Err(Error::Validation(format!(
            "leakage: documentation of entry {} appears in its prompt",
            entry.id
        )));
    }
    Ok(out)
}

pub fn render_prompt(
    entry: &DatasetEntry,
    template: &PromptTemplate,
    shots: &ShotConfig,
    train: &TrainIndex<'_>,
) -> Result<String> {
    render_with(entry, template, &train.resolve(shots)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptLine {
    pub id: String,
    pub prompt: String,
}

/// One prompt per entry, in split order.
pub fn render_run(
    entries: &[DatasetEntry],
    template: &PromptTemplate,
    shots: &ShotConfig,
    train: &TrainIndex<'_>,
) -> Result<Vec<PromptLine>> {
    template.validate()?;
    let exemplars = train.resolve(shots)?;
    entries
        .par_iter()
        .map(|e| {
            render_with(e, template, &exemplars)
                .map(|prompt| PromptLine {
                    id: e.id.clone(),
                    prompt,
                })
                .map_err(|err| match err {
                    Error::Validation(m) if !m.contains(&e.id) => {
                        Error::Validation(format!("entry {}: {m}", e.id))
                    }
                    other => other,
                })
        })
        .collect()
}

pub fn write_prompts(path: &Path, lines: &[PromptLine]) -> Result<()> {
    write_atomic(path, &to_jsonl_bytes(lines)?)
}

fn tag_count(doc: &str) -> usize {
    crate::javadoc::content_lines(doc)
        .iter()
        .filter(|l| l.trim_start().starts_with('@'))
        .count()
}

/// Suggests `k` exemplar candidates: tag-rich entries whose documentation
/// length is closest to the train median. Ties break by id.
pub fn propose_exemplars(train: &[DatasetEntry], k: usize) -> Vec<String> {
    if train.is_empty() {
        return Vec::new();
    }
    let mut lens: Vec<usize> = train.iter().map(|e| e.documentation.len()).collect();
    lens.sort_unstable();
    let median = lens[lens.len() / 2];
    let mut ranked: Vec<(usize, usize, &str)> = train
        .iter()
        .map(|e| {
            (
                tag_count(&e.documentation),
                e.documentation.len().abs_diff(median),
                e.id.as_str(),
            )
        })
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(b.2)));
    ranked
        .into_iter()
        .take(k)
        .map(|(_, _, id)| id.to_string())
        .collect()
}
