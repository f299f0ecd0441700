use std::collections::{BTreeMap, HashMap};
use std::sync::RwLock;

use serde::Serialize;

use super::{
    agreement_matrix, fleiss_kappa, qualification_score, qualifies, CategorySet, Decision,
    DecisionLog, Phase, Session,
};
use crate::dataset::DatasetEntry;
use crate::error::{Error, Result};
use crate::filter::scan_pii_documentation;

#[derive(Debug, Clone, Serialize)]
pub struct QueueItem {
    #[serde(flatten)]
    pub entry: DatasetEntry,
    pub session: String,
    pub pii_flags: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementView {
    pub session: String,
    pub categories: CategorySet,
    /// `None` until at least one item is fully rated.
    pub kappa: Option<f64>,
    pub items: usize,
    pub raters: usize,
    pub total_items: usize,
    pub status: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotatorProgress {
    pub annotator: String,
    pub assigned: usize,
    pub done: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qualification: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qualified: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProgressView {
    pub session: String,
    pub phase: Phase,
    pub total_items: usize,
    pub complete_items: usize,
    pub assignments: usize,
    pub decided: usize,
    pub completion: f64,
    pub annotators: Vec<AnnotatorProgress>,
}

/// Review state shared by concurrent annotators. Writes go through the
/// single decision log; reads work on a snapshot of it.
#[derive(Debug)]
pub struct ReviewService {
    sessions: BTreeMap<String, Session>,
    entries: HashMap<String, DatasetEntry>,
    log: RwLock<DecisionLog>,
}

impl ReviewService {
    pub fn new(
        sessions: Vec<Session>,
        entries: Vec<DatasetEntry>,
        log: DecisionLog,
    ) -> Result<Self> {
        let entries: HashMap<String, DatasetEntry> =
            entries.into_iter().map(|e| (e.id.clone(), e)).collect();
        let mut by_id = BTreeMap::new();
        for s in sessions {
            s.validate()?;
            if let Some(missing) = s.items.iter().find(|i| !entries.contains_key(*i)) {
                return Err(Error::Validation(format!(
                    "session {}: item {missing} is not in the dataset",
                    s.id
                )));
            }
            if by_id.insert(s.id.clone(), s).is_some() {
                return Err(Error::Validation("duplicate session id".into()));
            }
        }
        Ok(ReviewService {
            sessions: by_id,
            entries,
            log: RwLock::new(log),
        })
    }

    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.values()
    }

    pub fn session(&self, id: &str) -> Result<&Session> {
        self.sessions
            .get(id)
            .ok_or_else(|| Error::NotFound(format!("session {id}")))
    }

    fn snapshot(&self) -> Vec<Decision> {
        self.log
            .read()
            .expect("decision log lock poisoned")
            .effective()
    }

    /// Assigned items the annotator has not decided yet, across sessions
    /// (or within `session` when given), in session item order.
    pub fn queue(&self, annotator: &str, session: Option<&str>) -> Result<Vec<QueueItem>> {
        let sessions: Vec<&Session> = match session {
            Some(id) => vec![self.session(id)?],
            None => self.sessions.values().collect(),
        };
        if !sessions
            .iter()
            .any(|s| s.annotators.iter().any(|a| a == annotator))
        {
            return Err(Error::NotFound(format!("annotator {annotator}")));
        }
        let done: std::collections::HashSet<String> = self
            .snapshot()
            .into_iter()
            .filter(|d| d.annotator_id == annotator)
            .map(|d| d.entry_id)
            .collect();
        let mut out = Vec::new();
        for s in sessions {
            for item in s.items_for(annotator) {
                if done.contains(item) {
                    continue;
                }
                let entry = self.entries[item].clone();
                let pii_flags = scan_pii_documentation(&entry.documentation, &entry.code);
                out.push(QueueItem {
                    entry,
                    session: s.id.clone(),
                    pii_flags,
                });
            }
        }
        Ok(out)
    }

    /// Validates and durably records a decision; returns the stored record.
    pub fn submit(&self, decision: Decision) -> Result<Decision> {
        decision.validate()?;
        if !self.entries.contains_key(&decision.entry_id) {
            return Err(Error::NotFound(format!("entry {}", decision.entry_id)));
        }
        let assigned = self.sessions.values().any(|s| {
            s.assignment
                .get(&decision.entry_id)
                .is_some_and(|r| r.contains(&decision.annotator_id))
        });
        if !assigned {
            return Err(Error::Validation(format!(
                "entry {} is not assigned to annotator {}",
                decision.entry_id, decision.annotator_id
            )));
        }
        self.log
            .write()
            .expect("decision log lock poisoned")
            .append(decision)
    }

    pub fn agreement(&self, session: &str, categories: CategorySet) -> Result<AgreementView> {
        let s = self.session(session)?;
        let decisions = self.snapshot();
        let total_items = s.items.len();
        let (kappa, items, raters) = match agreement_matrix(s, &decisions, categories) {
            Some(m) => (Some(fleiss_kappa(&m)?), m.rows.len(), m.n),
            None => (None, 0, 0),
        };
        let status = match items {
            0 => "pending",
            n if n == total_items => "complete",
            _ => "partial",
        };
        Ok(AgreementView {
            session: s.id.clone(),
            categories,
            kappa,
            items,
            raters,
            total_items,
            status,
        })
    }

    pub fn progress(&self, session: &str) -> Result<ProgressView> {
        let s = self.session(session)?;
        let decisions = self.snapshot();
        let decided_pairs: std::collections::HashSet<(&str, &str)> = decisions
            .iter()
            .map(|d| (d.entry_id.as_str(), d.annotator_id.as_str()))
            .collect();
        let mut assignments = 0;
        let mut decided = 0;
        let mut complete_items = 0;
        for item in &s.items {
            let raters = s.assignment.get(item).map(|r| r.len()).unwrap_or(0);
            let done = s
                .assignment
                .get(item)
                .map(|r| {
                    r.iter()
                        .filter(|a| decided_pairs.contains(&(item.as_str(), a.as_str())))
                        .count()
                })
                .unwrap_or(0);
            assignments += raters;
            decided += done;
            if raters > 0 && done == raters {
                complete_items += 1;
            }
        }
        let annotators = s
            .annotators
            .iter()
            .map(|a| {
                let mine = s.items_for(a);
                let done = mine
                    .iter()
                    .filter(|i| decided_pairs.contains(&(**i, a.as_str())))
                    .count();
                let qualification = match s.phase {
                    Phase::Calibration => qualification_score(a, s, &decisions).ok(),
                    Phase::Review => None,
                };
                AnnotatorProgress {
                    annotator: a.clone(),
                    assigned: mine.len(),
                    done,
                    qualification,
                    qualified: qualification.map(qualifies),
                }
            })
            .collect();
        Ok(ProgressView {
            session: s.id.clone(),
            phase: s.phase,
            total_items: s.items.len(),
            complete_items,
            assignments,
            decided,
            completion: if assignments == 0 {
                0.0
            } else {
                decided as f64 / assignments as f64
            },
            annotators,
        })
    }
}
