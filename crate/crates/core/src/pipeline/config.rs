use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::accessibility::ScoreMode;
use crate::geometry::{Frame, LocalProjection};
use crate::geostat::EstimationParams;
use crate::gtfs::Weekday;
use crate::observations::validate_slot_length;
use crate::router::WalkModel;
use crate::schedule::{DayWindow, DEFAULT_WAIT_FLOOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Observed feeder trips; absent means a baseline-only run.
    #[serde(default)]
    pub observations: Option<PathBuf>,
    /// Base GTFS directory.
    pub gtfs: PathBuf,
    /// `lon,lat,count[,categories]`; absent means one opportunity per cell.
    #[serde(default)]
    pub opportunities: Option<PathBuf>,
    /// `from_stop,to_stop,seconds` walk times replacing the straight-line model.
    #[serde(default)]
    pub walk_overrides: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FrameConfig {
    /// Coordinates are already meters.
    Planar,
    /// Longitude/latitude projected around `origin` (lon, lat); defaults to
    /// the center of the base feed's stops.
    Geographic {
        #[serde(default)]
        origin: Option<[f64; 2]>,
    },
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig::Geographic { origin: None }
    }
}

impl FrameConfig {
    /// Resolves the frame, falling back to `center` for a geographic origin.
    pub fn resolve(&self, center: impl FnOnce() -> Option<(f64, f64)>) -> Result<Frame, PipelineError> {
        match self {
            FrameConfig::Planar => Ok(Frame::Planar),
            FrameConfig::Geographic { origin: Some([lon, lat]) } => Ok(Frame::Geographic(LocalProjection::new(*lon, *lat))),
            FrameConfig::Geographic { origin: None } => {
                let (lon, lat) = center().ok_or_else(|| {
                    PipelineError::Config("geographic frame needs an origin or a feed with stops".into())
                })?;
                Ok(Frame::Geographic(LocalProjection::new(lon, lat)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub frame: FrameConfig,
    /// `[min_x, min_y, max_x, max_y]` in input coordinates; defaults to the
    /// extent of the base feed's stops.
    pub study_area: Option<[f64; 4]>,
    pub hex_side: f64,
    pub tau: f64,
    pub slot_length: u32,
    pub lag_increment: f64,
    pub variogram_range: f64,
    pub max_lag: Option<f64>,
    pub min_samples: usize,
    pub walk: WalkModel,
    pub system_type: u8,
    pub rng_seed: u64,
    /// Seconds since midnight, half-open.
    pub day_window: [u32; 2],
    /// Departure times for the travel-time matrices; hourly over the window
    /// when absent.
    pub departure_samples: Option<Vec<u32>>,
    pub wait_floor: u32,
    /// An observation endpoint this close to its hub counts as at the hub.
    pub hub_tolerance: f64,
    /// Observations farther from their hub are ignored for the feeder area.
    pub feeder_max_radius: Option<f64>,
    pub score_mode: ScoreMode,
    pub relative_gain_threshold: f64,
    pub weekday: Option<Weekday>,
    /// Worker threads; not part of the configuration hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let est = EstimationParams::default();
        Self {
            paths: Paths {
                observations: None,
                gtfs: PathBuf::from("gtfs"),
                opportunities: None,
                walk_overrides: None,
                out: default_out(),
            },
            frame: FrameConfig::default(),
            study_area: None,
            hex_side: 1000.0,
            tau: 3600.0,
            slot_length: 3600,
            lag_increment: est.lag_increment,
            variogram_range: est.range,
            max_lag: est.max_lag,
            min_samples: est.min_samples,
            walk: WalkModel::default(),
            system_type: 1,
            rng_seed: 0,
            day_window: [5 * 3600, 23 * 3600],
            departure_samples: None,
            wait_floor: DEFAULT_WAIT_FLOOR,
            hub_tolerance: 100.0,
            feeder_max_radius: None,
            score_mode: ScoreMode::Sociality,
            relative_gain_threshold: 200_000.0,
            weekday: None,
            workers: None,
        }
    }
}

impl RunConfig {
    /// Reads a TOML file. Relative paths are taken from the file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.paths.rebase(base);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.hex_side) {
            return bad(format!("hex_side must be positive, got {}", self.hex_side));
        }
        if self.tau.is_nan() || self.tau < 0.0 {
            return bad(format!("tau must be nonnegative, got {}", self.tau));
        }
        validate_slot_length(self.slot_length).map_err(|e| PipelineError::Config(e.to_string()))?;
        self.estimation().validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.min_samples == 0 {
            return bad("min_samples must be positive".into());
        }
        self.walk.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if !matches!(self.system_type, 1 | 2) {
            return bad(format!("system_type must be 1 or 2, got {}", self.system_type));
        }
        self.window()?;
        if let Some(samples) = &self.departure_samples {
            if samples.is_empty() || samples.iter().any(|&t| t >= 86_400) {
                return bad("departure_samples must be non-empty times within the day".into());
            }
        }
        if self.wait_floor == 0 {
            return bad("wait_floor must be positive".into());
        }
        if !(self.hub_tolerance.is_finite() && self.hub_tolerance >= 0.0) {
            return bad("hub_tolerance must be nonnegative".into());
        }
        if let Some(r) = self.feeder_max_radius {
            if !positive(r) {
                return bad("feeder_max_radius must be positive".into());
            }
        }
        if let Some([x0, y0, x1, y1]) = self.study_area {
            if !(x0 < x1 && y0 < y1) {
                return bad("study_area must be [min_x, min_y, max_x, max_y] with positive extent".into());
            }
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        Ok(())
    }

    pub fn window(&self) -> Result<DayWindow, PipelineError> {
        DayWindow::new(self.day_window[0], self.day_window[1]).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn estimation(&self) -> EstimationParams {
        EstimationParams {
            lag_increment: self.lag_increment,
            range: self.variogram_range,
            max_lag: self.max_lag,
            min_samples: self.min_samples,
        }
    }

    /// Explicit samples, sorted and deduplicated, or every full hour in the window.
    pub fn departures(&self) -> Result<Vec<u32>, PipelineError> {
        let mut d = match &self.departure_samples {
            Some(v) => v.clone(),
            None => {
                let w = self.window()?;
                (w.start.div_ceil(3600) * 3600..w.end).step_by(3600).collect()
            }
        };
        d.sort_unstable();
        d.dedup();
        if d.is_empty() {
            return Err(PipelineError::Config("no departure samples fall in the day window".into()));
        }
        Ok(d)
    }

    /// Hash of every field that affects results. Worker count and output
    /// directory are left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = None;
        c.paths.out = PathBuf::new();
        let json = serde_json::to_string(&c).expect("configuration serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

impl Paths {
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.gtfs);
        fix(&mut self.out);
        for p in [&mut self.observations, &mut self.opportunities, &mut self.walk_overrides].into_iter().flatten() {
            fix(p);
        }
    }
}
