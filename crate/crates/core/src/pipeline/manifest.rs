use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::FilterName;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    ColdStart,
    RegularUpdate,
    /// Selection re-run over retained candidate sets.
    Reselect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Succeeded,
    Failed,
}

/// Per-run accounting. Every unit that enters a stage ends in exactly one
/// bucket; see [`PipelineManifest::balanced`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineManifest {
    pub stage: Stage,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub dry_run: bool,
    pub input_count: usize,
    pub selected_count: usize,
    pub filter_fails: BTreeMap<FilterName, usize>,
    pub quarantined: usize,
    pub dedup_skipped: usize,
    /// Cascade survivors that lost best-of-n selection.
    pub not_selected: usize,
    /// Requested translations the producer could not deliver.
    pub generation_failures: usize,
    /// (source, target) units with no candidate surviving the cascade.
    pub units_without_survivor: usize,
    pub languages: BTreeSet<String>,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rubric_hash: Option<String>,
}

impl PipelineManifest {
    pub fn new(stage: Stage, started_at: DateTime<Utc>, config_hash: impl Into<String>) -> Self {
        Self {
            stage,
            status: RunStatus::Succeeded,
            error: None,
            started_at,
            finished_at: started_at,
            dry_run: false,
            input_count: 0,
            selected_count: 0,
            filter_fails: FilterName::ALL.iter().map(|&f| (f, 0)).collect(),
            quarantined: 0,
            dedup_skipped: 0,
            not_selected: 0,
            generation_failures: 0,
            units_without_survivor: 0,
            languages: BTreeSet::new(),
            config_hash: config_hash.into(),
            rubric_hash: None,
        }
    }

    pub fn fail_total(&self) -> usize {
        self.filter_fails.values().sum()
    }

    pub fn accounted(&self) -> usize {
        self.selected_count
            + self.fail_total()
            + self.quarantined
            + self.dedup_skipped
            + self.not_selected
            + self.generation_failures
    }

    /// `input_count` equals the sum of all outcome buckets.
    pub fn balanced(&self) -> bool {
        self.input_count == self.accounted()
    }

    pub fn succeeded(&self) -> bool {
        self.status == RunStatus::Succeeded
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("manifest: {e}")))
    }

    /// Short human summary for stderr.
    pub fn summary(&self) -> String {
        let fails: Vec<String> = self
            .filter_fails
            .iter()
            .filter(|(_, n)| **n > 0)
            .map(|(f, n)| format!("{f}={n}"))
            .collect();
        format!(
            "{:?} {:?}: input={} selected={} failed={} [{}] quarantined={} dedup_skipped={} not_selected={} generation_failures={}",
            self.stage,
            self.status,
            self.input_count,
            self.selected_count,
            self.fail_total(),
            fails.join(" "),
            self.quarantined,
            self.dedup_skipped,
            self.not_selected,
            self.generation_failures
        )
    }
}
