use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Computed,
    /// Inputs unchanged since the last run; artifacts reused.
    Cached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub status: StageStatus,
    pub seconds: f64,
    /// Hash of the stage's parameters, inputs and upstream stamps.
    pub stamp: String,
    pub counts: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl StageRecord {
    pub(crate) fn new(stage: &str) -> Self {
        Self {
            stage: stage.to_string(),
            status: StageStatus::Computed,
            seconds: 0.0,
            stamp: String::new(),
            counts: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub(crate) fn count(&mut self, key: &str, v: impl Into<f64>) {
        self.counts.insert(key.to_string(), v.into());
    }

    pub(crate) fn warn(&mut self, msg: String) {
        log::warn!("{}: {msg}", self.stage);
        self.warnings.push(msg);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub stage: String,
    pub message: String,
}

/// Written to the output directory after every invocation, failed or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub rng_seed: u64,
    pub workers: usize,
    pub stages: Vec<StageRecord>,
    pub failure: Option<Failure>,
}

impl RunManifest {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.stage == name)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.stages.iter().flat_map(|s| s.warnings.iter().map(String::as_str))
    }
}
