use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{effective_decisions, Decision};
use crate::error::{Error, Result};
use crate::jsonl::read_jsonl;

/// Append-only JSONL decision log. Every append is flushed and synced
/// before it returns; derived state is recomputed from the full log.
#[derive(Debug)]
pub struct DecisionLog {
    path: PathBuf,
    file: File,
    decisions: Vec<Decision>,
}

impl DecisionLog {
    pub fn open(path: &Path) -> Result<Self> {
        let decisions = if path.exists() {
            read_jsonl(path)?
        } else {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            Vec::new()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(DecisionLog {
            path: path.to_path_buf(),
            file,
            decisions,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Durably appends `decision`. A decision for an (annotator, entry) pair
    /// that already has one supersedes it; both stay in the log.
    pub fn append(&mut self, mut decision: Decision) -> Result<Decision> {
        decision.validate()?;
        if decision.timestamp.is_empty() {
            decision.timestamp =
                chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true);
        }
        if let Some(prev) =
            self.decisions.iter().rev().find(|d| {
                d.annotator_id == decision.annotator_id && d.entry_id == decision.entry_id
            })
        {
            tracing::warn!(
                annotator = %decision.annotator_id,
                entry = %decision.entry_id,
                previous = ?prev.verdict,
                new = ?decision.verdict,
                "decision superseded; last write wins"
            );
        }
        let mut line = serde_json::to_vec(&decision).map_err(|e| Error::json("decision", e))?;
        line.push(b'\n');
        self.file
            .write_all(&line)
            .map_err(|e| Error::io(&self.path, e))?;
        self.file
            .sync_data()
            .map_err(|e| Error::io(&self.path, e))?;
        self.decisions.push(decision.clone());
        Ok(decision)
    }

    /// Every logged decision, superseded ones included.
    pub fn all(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn effective(&self) -> Vec<Decision> {
        effective_decisions(&self.decisions)
    }
}
