//! Human review: annotator assignment, agreement, qualification, and
//! application of keep/remove decisions to the corpus.

#[cfg(feature = "server")]
pub mod server;
mod service;
mod store;

pub use service::{AgreementView, AnnotatorProgress, ProgressView, QueueItem, ReviewService};
pub use store::DecisionLog;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum calibration accuracy for an annotator to take part in review.
pub const QUALIFICATION_THRESHOLD: f64 = 0.90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Keep,
    Remove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Ok,
    Faulty,
    OutOfContext,
    Irrelevant,
    PersonalInfo,
}

impl Reason {
    pub const ALL: [Reason; 5] = [
        Reason::Ok,
        Reason::Faulty,
        Reason::OutOfContext,
        Reason::Irrelevant,
        Reason::PersonalInfo,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub entry_id: String,
    pub annotator_id: String,
    pub verdict: Verdict,
    pub reason: Reason,
    #[serde(default)]
    pub timestamp: String,
}

impl Decision {
    pub fn new(entry_id: &str, annotator_id: &str, verdict: Verdict, reason: Reason) -> Self {
        Decision {
            entry_id: entry_id.into(),
            annotator_id: annotator_id.into(),
            verdict,
            reason,
            timestamp: String::new(),
        }
    }

    /// `keep` goes with `ok` and only with `ok`.
    pub fn validate(&self) -> Result<()> {
        if (self.verdict == Verdict::Keep) != (self.reason == Reason::Ok) {
            return Err(Error::Validation(format!(
                "verdict {:?} is inconsistent with reason {:?}",
                self.verdict, self.reason
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Calibration,
    Review,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub verdict: Verdict,
    #[serde(default = "default_reason")]
    pub reason: Reason,
}

fn default_reason() -> Reason {
    Reason::Ok
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub annotators: Vec<String>,
    pub items: Vec<String>,
    pub assignment: BTreeMap<String, BTreeSet<String>>,
    pub phase: Phase,
    #[serde(default)]
    pub gold: Option<BTreeMap<String, GoldLabel>>,
}

impl Session {
    pub fn load(path: &Path) -> Result<Self> {
        let s: Session = crate::jsonl::read_json(path)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let registered: HashSet<&str> = self.annotators.iter().map(String::as_str).collect();
        let items: HashSet<&str> = self.items.iter().map(String::as_str).collect();
        for (item, raters) in &self.assignment {
            if !items.contains(item.as_str()) {
                return Err(Error::Validation(format!(
                    "session {}: assigned item {item} is not a session item",
                    self.id
                )));
            }
            if let Some(a) = raters.iter().find(|a| !registered.contains(a.as_str())) {
                return Err(Error::Validation(format!(
                    "session {}: annotator {a} is not registered",
                    self.id
                )));
            }
        }
        if self.phase == Phase::Calibration {
            let gold = self.gold.as_ref().ok_or_else(|| {
                Error::Validation(format!(
                    "calibration session {} has no gold labels",
                    self.id
                ))
            })?;
            if let Some(item) = self.items.iter().find(|i| !gold.contains_key(*i)) {
                return Err(Error::Validation(format!(
                    "calibration session {}: item {item} lacks a gold label",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn items_for(&self, annotator: &str) -> Vec<&str> {
        self.items
            .iter()
            .filter(|i| {
                self.assignment
                    .get(*i)
                    .is_some_and(|r| r.contains(annotator))
            })
            .map(String::as_str)
            .collect()
    }
}

/// Assigns every item to `raters_per_item` distinct annotators so that each
/// annotator receives exactly `per_annotator` items. Items are shuffled by
/// `seed`, then the item-major slot sequence is dealt round-robin.
pub fn assign_samples(
    items: &[String],
    annotators: &[String],
    per_annotator: usize,
    raters_per_item: usize,
    seed: u64,
) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let slots = items.len() * raters_per_item;
    if slots != annotators.len() * per_annotator {
        return Err(Error::Validation(format!(
            "infeasible assignment: items × raters_per_item = {} × {} = {} but annotators × per_annotator = {} × {} = {}",
            items.len(),
            raters_per_item,
            slots,
            annotators.len(),
            per_annotator,
            annotators.len() * per_annotator
        )));
    }
    if raters_per_item > annotators.len() {
        return Err(Error::Validation(format!(
            "raters_per_item {raters_per_item} exceeds annotator count {}",
            annotators.len()
        )));
    }
    let mut order: Vec<&String> = items.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (slot, item) in order
        .iter()
        .flat_map(|i| std::iter::repeat_n(*i, raters_per_item))
        .enumerate()
    {
        out.entry(item.clone())
            .or_default()
            .insert(annotators[slot % annotators.len()].clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementMatrix {
    /// One row per item; cell = raters choosing that category.
    pub rows: Vec<Vec<usize>>,
    pub n: usize,
    pub k: usize,
}

impl AgreementMatrix {
    pub fn new(rows: Vec<Vec<usize>>) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Validation("agreement matrix has no rows".into()))?;
        let k = first.len();
        let n: usize = first.iter().sum();
        let m = AgreementMatrix { rows, n, k };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Validation(format!(
                "need ≥ 2 raters per item, got {}",
                self.n
            )));
        }
        if self.rows.is_empty() {
            return Err(Error::Validation("agreement matrix has no rows".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.k {
                return Err(Error::Validation(format!(
                    "row {i} has {} categories, expected {}",
                    row.len(),
                    self.k
                )));
            }
            let sum: usize = row.iter().sum();
            if sum != self.n {
                return Err(Error::Validation(format!(
                    "malformed matrix: row {i} sums to {sum}, expected {}",
                    self.n
                )));
            }
        }
        Ok(())
    }
}

/// κ = (P̄o − P̄e) / (1 − P̄e).
pub fn fleiss_kappa(m: &AgreementMatrix) -> Result<f64> {
    m.validate()?;
    let n = m.n as f64;
    let items = m.rows.len() as f64;
    let observed = m
        .rows
        .iter()
        .map(|row| (row.iter().map(|&c| (c * c) as f64).sum::<f64>() - n) / (n * (n - 1.0)))
        .sum::<f64>()
        / items;
    let expected: f64 = (0..m.k)
        .map(|j| {
            let p = m.rows.iter().map(|r| r[j]).sum::<usize>() as f64 / (items * n);
            p * p
        })
        .sum();
    if expected == 1.0 {
        return if observed == 1.0 {
            Ok(1.0)
        } else {
            Err(Error::Validation(
                "degenerate matrix: expected agreement is 1".into(),
            ))
        };
    }
    Ok((observed - expected) / (1.0 - expected))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategorySet {
    #[default]
    Verdict,
    Reason,
}

impl FromStr for CategorySet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "verdict" => Ok(CategorySet::Verdict),
            "reason" => Ok(CategorySet::Reason),
            other => Err(Error::Config(format!("unknown category set `{other}`"))),
        }
    }
}

/// Latest decision per (annotator, entry), in first-seen order.
pub fn effective_decisions(decisions: &[Decision]) -> Vec<Decision> {
    let mut index: HashMap<(&str, &str), usize> = HashMap::new();
    let mut out: Vec<Decision> = Vec::new();
    for d in decisions {
        match index.get(&(d.annotator_id.as_str(), d.entry_id.as_str())) {
            Some(&i) => out[i] = d.clone(),
            None => {
                index.insert((d.annotator_id.as_str(), d.entry_id.as_str()), out.len());
                out.push(d.clone());
            }
        }
    }
    out
}

/// Agreement matrix over session items whose assigned raters have all
/// decided. Only items with the modal rater count contribute, so every row
/// has the same `n`. `None` when no item qualifies.
pub fn agreement_matrix(
    session: &Session,
    decisions: &[Decision],
    categories: CategorySet,
) -> Option<AgreementMatrix> {
    let eff = effective_decisions(decisions);
    let by_key: HashMap<(&str, &str), &Decision> = eff
        .iter()
        .map(|d| ((d.entry_id.as_str(), d.annotator_id.as_str()), d))
        .collect();
    let mut complete: Vec<(usize, Vec<usize>)> = Vec::new();
    for item in &session.items {
        let Some(raters) = session.assignment.get(item) else {
            continue;
        };
        let votes: Option<Vec<&Decision>> = raters
            .iter()
            .map(|a| by_key.get(&(item.as_str(), a.as_str())).copied())
            .collect();
        let Some(votes) = votes else { continue };
        let k = match categories {
            CategorySet::Verdict => 2,
            CategorySet::Reason => Reason::ALL.len(),
        };
        let mut row = vec![0usize; k];
        for v in &votes {
            let j = match categories {
                CategorySet::Verdict => v.verdict as usize,
                CategorySet::Reason => v.reason as usize,
            };
            row[j] += 1;
        }
        complete.push((votes.len(), row));
    }
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for (n, _) in &complete {
        *freq.entry(*n).or_default() += 1;
    }
    let (&n, _) = freq
        .iter()
        .filter(|(&n, _)| n >= 2)
        .max_by_key(|(&n, &count)| (count, n))?;
    let rows = complete
        .into_iter()
        .filter(|(m, _)| *m == n)
        .map(|(_, r)| r)
        .collect();
    AgreementMatrix::new(rows).ok()
}

/// Fraction of the annotator's calibration decisions matching gold.
pub fn qualification_score(
    annotator: &str,
    session: &Session,
    decisions: &[Decision],
) -> Result<f64> {
    if session.phase != Phase::Calibration {
        return Err(Error::Validation(format!(
            "session {} is not a calibration session",
            session.id
        )));
    }
    let gold = session
        .gold
        .as_ref()
        .ok_or_else(|| Error::Validation(format!("session {} has no gold labels", session.id)))?;
    let eff = effective_decisions(decisions);
    let mine: Vec<&Decision> = eff
        .iter()
        .filter(|d| d.annotator_id == annotator && gold.contains_key(&d.entry_id))
        .collect();
    if mine.is_empty() {
        return Err(Error::Validation(format!(
            "annotator {annotator} has no calibration decisions"
        )));
    }
    let correct = mine
        .iter()
        .filter(|d| gold[&d.entry_id].verdict == d.verdict)
        .count();
    Ok(correct as f64 / mine.len() as f64)
}

pub fn qualifies(score: f64) -> bool {
    score >= QUALIFICATION_THRESHOLD
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewPolicy {
    /// Removed if any rater voted remove.
    #[default]
    AnyRemove,
    /// Removed iff removes outnumber keeps.
    Majority,
}

impl FromStr for ReviewPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "any_remove" => Ok(ReviewPolicy::AnyRemove),
            "majority" => Ok(ReviewPolicy::Majority),
            other => Err(Error::Config(format!("unknown review policy `{other}`"))),
        }
    }
}

/// Entry ids that survive review, in input order. Undecided entries stay.
pub fn apply_review(
    entry_ids: &[String],
    decisions: &[Decision],
    policy: ReviewPolicy,
) -> Result<Vec<String>> {
    let known: HashSet<&str> = entry_ids.iter().map(String::as_str).collect();
    let mut tally: HashMap<&str, (usize, usize)> = HashMap::new();
    let eff = effective_decisions(decisions);
    for d in &eff {
        if !known.contains(d.entry_id.as_str()) {
            return Err(Error::Validation(format!(
                "decision for unknown entry {}",
                d.entry_id
            )));
        }
        let t = tally.entry(d.entry_id.as_str()).or_default();
        match d.verdict {
            Verdict::Keep => t.0 += 1,
            Verdict::Remove => t.1 += 1,
        }
    }
    Ok(entry_ids
        .iter()
        .filter(|id| {
            let (keeps, removes) = tally.get(id.as_str()).copied().unwrap_or((0, 0));
            match policy {
                ReviewPolicy::AnyRemove => removes == 0,
                ReviewPolicy::Majority => removes <= keeps,
            }
        })
        .cloned()
        .collect())
}
