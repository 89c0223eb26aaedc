//! The run manifest: per-document stage status, counters, and a config
//! snapshot, rewritten atomically after every status change.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::RunError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocStatus {
    #[default]
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct DocRecord {
    #[serde(default = "default_status")]
    pub status: DocStatus,
    /// Stage name -> completed (artifact present and well-formed).
    #[serde(default)]
    pub stages: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn default_status() -> DocStatus {
    DocStatus::Pending
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Counters {
    pub llm_calls: u64,
    pub cache_hits: u64,
    pub cache_corrupt: u64,
    pub truncated_responses: u64,
    pub skipped_statements: u64,
    pub dropped_off_ontology: u64,
    pub relations_extracted: u64,
    pub validator_malformed: u64,
    pub questions_dropped: u64,
    pub authored_dropped: u64,
    pub renamed_collisions: u64,
    pub empty_kgs: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub started_at_unix: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at_unix: Option<u64>,
    pub config: serde_json::Value,
    pub documents: BTreeMap<String, DocRecord>,
    pub counters: Counters,
}

impl RunManifest {
    pub fn new(
        config: serde_json::Value,
        doc_ids: impl IntoIterator<Item = String>,
    ) -> RunManifest {
        RunManifest {
            started_at_unix: unix_now(),
            finished_at_unix: None,
            config,
            documents: doc_ids
                .into_iter()
                .map(|id| (id, DocRecord::default()))
                .collect(),
            counters: Counters::default(),
        }
    }

    pub fn path(run_dir: &Path) -> PathBuf {
        run_dir.join("manifest.json")
    }

    pub fn load(run_dir: &Path) -> Result<RunManifest, RunError> {
        let text = std::fs::read_to_string(Self::path(run_dir))?;
        serde_json::from_str(&text).map_err(|e| RunError::Schema {
            line: 0,
            message: format!("manifest: {e}"),
        })
    }

    /// Status transitions are monotone: only pending may change.
    pub fn set_status(&mut self, doc_id: &str, status: DocStatus, error: Option<String>) {
        let record = self.documents.entry(doc_id.to_string()).or_default();
        if record.status == DocStatus::Pending {
            record.status = status;
            record.error = error;
        }
    }

    pub fn mark_stage(&mut self, doc_id: &str, stage: &str) {
        self.documents
            .entry(doc_id.to_string())
            .or_default()
            .stages
            .insert(stage.to_string(), true);
    }

    pub fn finish(&mut self) {
        self.finished_at_unix = Some(unix_now());
    }

    pub fn done_count(&self) -> usize {
        self.documents
            .values()
            .filter(|d| d.status == DocStatus::Done)
            .count()
    }

    pub fn failed_count(&self) -> usize {
        self.documents
            .values()
            .filter(|d| d.status == DocStatus::Failed)
            .count()
    }

    /// Atomic write-then-rename.
    pub fn write(&self, run_dir: &Path) -> Result<(), RunError> {
        std::fs::create_dir_all(run_dir)?;
        let path = Self::path(run_dir);
        let tmp = run_dir.join(format!(".manifest.tmp-{}", std::process::id()));
        std::fs::write(
            &tmp,
            serde_json::to_vec_pretty(self).expect("manifest serializes"),
        )?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
