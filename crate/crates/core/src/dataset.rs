//! Dataset assembly, seeded splitting, serialization, and statistics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decl::DeclKind;
use crate::error::{Error, Result};
use crate::extract::ExtractionRecord;
use crate::jsonl::{read_json, read_jsonl, temp_path, to_jsonl_bytes};

/// Train/validation/test fractions observed in the released corpus
/// (2,778 / 140 / 696 of 3,614).
pub const DEFAULT_RATIOS: [f64; 3] = [0.7687, 0.0387, 0.1926];

pub const SPLIT_NAMES: [&str; 3] = ["train", "validation", "test"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: String,
    pub package: String,
    pub enclosing_class: String,
    pub kind: DeclKind,
    pub code: String,
    pub documentation: String,
    pub repo: String,
    pub license_id: String,
    pub uses_lambda: bool,
}

#[derive(Debug, Clone)]
pub struct AssembleConfig {
    pub kinds: Vec<DeclKind>,
}

impl Default for AssembleConfig {
    fn default() -> Self {
        AssembleConfig {
            kinds: vec![DeclKind::Method, DeclKind::Constructor],
        }
    }
}

impl AssembleConfig {
    /// Default allow-list plus class-level documentation.
    pub fn with_types() -> Self {
        let mut cfg = Self::default();
        cfg.kinds.extend([
            DeclKind::Class,
            DeclKind::Interface,
            DeclKind::Enum,
            DeclKind::Record,
        ]);
        cfg
    }
}

pub fn entry_id(repo: &str, rel_path: &str, span: (usize, usize)) -> String {
    let mut h = Sha256::new();
    h.update(repo.as_bytes());
    h.update([0]);
    h.update(rel_path.as_bytes());
    h.update([0]);
    h.update(span.0.to_le_bytes());
    h.update(span.1.to_le_bytes());
    hex::encode(&h.finalize()[..8])
}

pub fn assemble(kept: &[ExtractionRecord], cfg: &AssembleConfig) -> Result<Vec<DatasetEntry>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for r in kept.iter().filter(|r| cfg.kinds.contains(&r.decl.kind)) {
        let id = entry_id(&r.repo, &r.rel_path, r.decl.span);
        if !seen.insert(id.clone()) {
            return Err(Error::Validation(format!(
                "entry id collision for {}/{} at {:?}",
                r.repo, r.rel_path, r.decl.span
            )));
        }
        out.push(DatasetEntry {
            id,
            package: r.decl.package.clone().unwrap_or_default(),
            enclosing_class: r.decl.enclosing_chain.join("."),
            kind: r.decl.kind,
            code: r.code.clone(),
            documentation: r.javadoc.raw.clone(),
            repo: r.repo.clone(),
            license_id: r.license_id.clone(),
            uses_lambda: r.decl.uses_lambda,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
    pub ratios: [f64; 3],
}

impl SplitAssignment {
    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.validation.len(), self.test.len()]
    }

    pub fn split(&self, name: &str) -> Option<&[String]> {
        match name {
            "train" => Some(&self.train),
            "validation" => Some(&self.validation),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    fn parts(&self) -> [&[String]; 3] {
        [&self.train, &self.validation, &self.test]
    }
}

pub fn validate_ratios(ratios: [f64; 3]) -> Result<()> {
    if ratios
        .iter()
        .any(|r| r.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !r.is_finite())
    {
        return Err(Error::Validation(format!(
            "split ratios must be positive: {ratios:?}"
        )));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "split ratios sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Cut sizes for `n` items at the rounded cumulative ratio boundaries.
pub fn cut_sizes(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let b1 = ((ratios[0] * n as f64).round() as usize).min(n);
    let b2 = (((ratios[0] + ratios[1]) * n as f64).round() as usize).clamp(b1, n);
    [b1, b2 - b1, n - b2]
}

/// Seeded shuffle followed by ratio cuts, optionally within each repository.
pub fn split(
    entries: &[DatasetEntry],
    ratios: [f64; 3],
    seed: u64,
    stratify_by_repo: bool,
) -> Result<SplitAssignment> {
    if entries.is_empty() {
        return Err(Error::Validation("cannot split an empty dataset".into()));
    }
    if entries.len() < 3 {
        return Err(Error::Validation(format!(
            "need at least 3 entries to split, got {}",
            entries.len()
        )));
    }
    validate_ratios(ratios)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<String>> = if stratify_by_repo {
        let mut by_repo: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for e in entries {
            by_repo.entry(&e.repo).or_default().push(e.id.clone());
        }
        by_repo.into_values().collect()
    } else {
        vec![entries.iter().map(|e| e.id.clone()).collect()]
    };
    let mut out = SplitAssignment {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
        ratios,
    };
    for mut ids in groups {
        ids.shuffle(&mut rng);
        let [a, b, _] = cut_sizes(ids.len(), ratios);
        let test = ids.split_off(a + b);
        let validation = ids.split_off(a);
        out.train.extend(ids);
        out.validation.extend(validation);
        out.test.extend(test);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub counts: BTreeMap<String, usize>,
    pub total: usize,
    pub tool_version: String,
}

/// Writes `train.jsonl`, `validation.jsonl`, `test.jsonl` and
/// `manifest.json`. Every file is staged under a temp name first and only
/// renamed into place once all four are written.
pub fn write_dataset(
    entries: &[DatasetEntry],
    assignment: &SplitAssignment,
    dir: &Path,
) -> Result<DatasetManifest> {
    let by_id: HashMap<&str, &DatasetEntry> = entries.iter().map(|e| (e.id.as_str(), e)).collect();
    let assigned: usize = assignment.sizes().iter().sum();
    if assigned != entries.len() {
        return Err(Error::Validation(format!(
            "assignment covers {assigned} ids but there are {} entries",
            entries.len()
        )));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut staged = Vec::new();
    let mut counts = BTreeMap::new();
    for (name, ids) in SPLIT_NAMES.iter().zip(assignment.parts()) {
        let rows = ids
            .iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Validation(format!("assigned id {id} has no entry")))
            })
            .collect::<Result<Vec<_>>>()?;
        counts.insert(name.to_string(), rows.len());
        staged.push((dir.join(format!("{name}.jsonl")), to_jsonl_bytes(&rows)?));
    }
    let manifest = DatasetManifest {
        seed: assignment.seed,
        ratios: assignment.ratios,
        counts,
        total: entries.len(),
        tool_version: crate::TOOL_VERSION.to_string(),
    };
    let mut manifest_bytes =
        serde_json::to_vec_pretty(&manifest).map_err(|e| Error::json("manifest", e))?;
    manifest_bytes.push(b'\n');
    staged.push((dir.join("manifest.json"), manifest_bytes));

    let mut temps = Vec::new();
    for (path, bytes) in &staged {
        let tmp = temp_path(path);
        if let Err(e) = fs::write(&tmp, bytes) {
            for t in &temps {
                let _ = fs::remove_file(t);
            }
            return Err(Error::io(&tmp, e));
        }
        temps.push(tmp);
    }
    for ((path, _), tmp) in staged.iter().zip(&temps) {
        fs::rename(tmp, path).map_err(|e| Error::io(path, e))?;
    }
    Ok(manifest)
}

/// Reads a dataset directory back; entries come out in split-file order.
pub fn read_dataset(dir: &Path) -> Result<(Vec<DatasetEntry>, SplitAssignment)> {
    let manifest: DatasetManifest = read_json(&dir.join("manifest.json"))?;
    let mut entries = Vec::new();
    let mut parts: Vec<Vec<String>> = Vec::new();
    for name in SPLIT_NAMES {
        let rows: Vec<DatasetEntry> = read_jsonl(&dir.join(format!("{name}.jsonl")))?;
        parts.push(rows.iter().map(|e| e.id.clone()).collect());
        entries.extend(rows);
    }
    let test = parts.pop().unwrap();
    let validation = parts.pop().unwrap();
    let train = parts.pop().unwrap();
    Ok((
        entries,
        SplitAssignment {
            train,
            validation,
            test,
            seed: manifest.seed,
            ratios: manifest.ratios,
        },
    ))
}

pub fn read_split(dir: &Path, name: &str) -> Result<Vec<DatasetEntry>> {
    if !SPLIT_NAMES.contains(&name) {
        return Err(Error::Config(format!("unknown split `{name}`")));
    }
    read_jsonl(&dir.join(format!("{name}.jsonl")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub mean: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub totals: BTreeMap<String, usize>,
    pub total: usize,
    /// Split shares of the corpus, rendered to two decimals.
    pub percentages: BTreeMap<String, String>,
    pub per_repo: BTreeMap<String, usize>,
    pub per_kind: BTreeMap<String, usize>,
    pub lambda_share: f64,
    pub code_length: LengthStats,
    pub doc_length: LengthStats,
}

fn length_stats(mut lens: Vec<usize>) -> LengthStats {
    if lens.is_empty() {
        return LengthStats {
            mean: 0.0,
            median: 0.0,
        };
    }
    lens.sort_unstable();
    let n = lens.len();
    let mean = lens.iter().sum::<usize>() as f64 / n as f64;
    let median = if n % 2 == 1 {
        lens[n / 2] as f64
    } else {
        (lens[n / 2 - 1] + lens[n / 2]) as f64 / 2.0
    };
    LengthStats { mean, median }
}

pub fn dataset_stats(entries: &[DatasetEntry], assignment: &SplitAssignment) -> StatsReport {
    let mut totals = BTreeMap::new();
    for (name, ids) in SPLIT_NAMES.iter().zip(assignment.parts()) {
        totals.insert(name.to_string(), ids.len());
    }
    let total: usize = totals.values().sum();
    let percentages = totals
        .iter()
        .map(|(k, &v)| {
            let pct = if total == 0 {
                0.0
            } else {
                100.0 * v as f64 / total as f64
            };
            (k.clone(), format!("{pct:.2}"))
        })
        .collect();
    let mut per_repo = BTreeMap::new();
    let mut per_kind = BTreeMap::new();
    for e in entries {
        *per_repo.entry(e.repo.clone()).or_insert(0) += 1;
        *per_kind.entry(e.kind.as_str().to_string()).or_insert(0) += 1;
    }
    let lambda = entries.iter().filter(|e| e.uses_lambda).count();
    StatsReport {
        totals,
        total,
        percentages,
        per_repo,
        per_kind,
        lambda_share: if entries.is_empty() {
            0.0
        } else {
            lambda as f64 / entries.len() as f64
        },
        code_length: length_stats(entries.iter().map(|e| e.code.chars().count()).collect()),
        doc_length: length_stats(
            entries
                .iter()
                .map(|e| e.documentation.chars().count())
                .collect(),
        ),
    }
}
