//! Staged end-to-end run: tessellate, estimate, synthesize, route, score,
//! compare. Every stage reads its inputs from the artifacts of the previous
//! one, so running stages one by one gives the same files as a full run.

pub mod config;
pub mod demo;
mod manifest;
mod stages;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

pub use config::{FrameConfig, Paths, RunConfig};
pub use manifest::{Failure, RunManifest, StageRecord, StageStatus, MANIFEST_FILE};
pub use stages::{artifacts, run, GridArtifact, SurfaceArtifact};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("artifact {path}: {reason}")]
    Artifact { path: PathBuf, reason: String },
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Observations(#[from] crate::observations::ObservationError),
    #[error(transparent)]
    Geostat(#[from] crate::geostat::GeostatError),
    #[error(transparent)]
    Gtfs(#[from] crate::gtfs::GtfsError),
    #[error(transparent)]
    Schedule(#[from] crate::schedule::ScheduleError),
    #[error(transparent)]
    Router(#[from] crate::router::RouterError),
    #[error(transparent)]
    Access(#[from] crate::accessibility::AccessError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Tessellate,
    Estimate,
    Synthesize,
    Route,
    Score,
    Compare,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Tessellate,
        Stage::Estimate,
        Stage::Synthesize,
        Stage::Route,
        Stage::Score,
        Stage::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Tessellate => "tessellate",
            Stage::Estimate => "estimate",
            Stage::Synthesize => "synthesize",
            Stage::Route => "route",
            Stage::Score => "score",
            Stage::Compare => "compare",
        }
    }

    /// Stages that must be current before this one runs, in order.
    pub fn chain(self) -> &'static [Stage] {
        let i = Stage::ALL.iter().position(|&s| s == self).expect("listed");
        &Stage::ALL[..=i]
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}
