//! Observed shared-mobility trips: ingestion, access/egress classification,
//! feeder areas around hubs and grouping into timeslots.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{distance, CellId, Frame, HexGrid, Point};

pub const SECONDS_PER_DAY: u32 = 86_400;

/// Header of the observation CSV; a trailing `direction` column is optional.
pub const OBSERVATION_COLUMNS: [&str; 8] = [
    "request_time_s",
    "origin_lon",
    "origin_lat",
    "dest_lon",
    "dest_lat",
    "hub_id",
    "wait_s",
    "in_vehicle_s",
];

#[derive(Debug, thiserror::Error)]
pub enum ObservationError {
    #[error("cannot read observations from {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("observation file {path} is missing column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("neither endpoint lies within {tolerance} m of a hub")]
    NoHubEndpoint { tolerance: f64 },
    #[error("slot length {0} s must be positive and divide 86400")]
    InvalidSlotLength(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Access,
    Egress,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::Access, Direction::Egress];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Access => "access",
            Direction::Egress => "egress",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "access" => Ok(Direction::Access),
            "egress" => Ok(Direction::Egress),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

/// One recorded feeder trip. `location` is the endpoint that is not the hub:
/// the pick-up point of an access trip, the drop-off point of an egress trip.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub request_time: f64,
    pub location: Point,
    pub hub_id: String,
    pub wait: f64,
    pub in_vehicle: f64,
    pub direction: Direction,
}

impl Observation {
    fn sort_key_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.request_time
            .total_cmp(&other.request_time)
            .then(self.location.x.total_cmp(&other.location.x))
            .then(self.location.y.total_cmp(&other.location.y))
            .then(self.wait.total_cmp(&other.wait))
            .then(self.in_vehicle.total_cmp(&other.in_vehicle))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hub {
    pub id: String,
    pub location: Point,
    pub feeder_radius: Option<f64>,
}

impl Hub {
    pub fn new(id: impl Into<String>, location: Point) -> Self {
        Self {
            id: id.into(),
            location,
            feeder_radius: None,
        }
    }
}

/// Access when the destination is a hub, egress when the origin is; a trip
/// between two hubs counts as access.
pub fn classify(
    origin: Point,
    destination: Point,
    hubs: &[Hub],
    tolerance: f64,
) -> Result<Direction, ObservationError> {
    let near = |p: Point| hubs.iter().any(|h| distance(p, h.location) <= tolerance);
    if near(destination) {
        Ok(Direction::Access)
    } else if near(origin) {
        Ok(Direction::Egress)
    } else {
        Err(ObservationError::NoHubEndpoint { tolerance })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    /// 1-based line number in the file, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub observations: Vec<Observation>,
    pub rejected: Vec<RowError>,
}

#[derive(Debug, Deserialize)]
struct ObservationRow {
    request_time_s: f64,
    origin_lon: f64,
    origin_lat: f64,
    dest_lon: f64,
    dest_lat: f64,
    hub_id: String,
    wait_s: f64,
    in_vehicle_s: f64,
    #[serde(default)]
    direction: Option<String>,
}

/// Reads the observation CSV. Malformed or invalid rows are reported in
/// [`IngestReport::rejected`] and skipped; only an unreadable file or a
/// missing column is fatal.
pub fn ingest(
    path: &Path,
    hubs: &HashMap<String, Hub>,
    frame: &Frame,
    hub_tolerance: f64,
) -> Result<IngestReport, ObservationError> {
    let unreadable = |source| ObservationError::Unreadable {
        path: path.display().to_string(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(unreadable)?;
    let headers = reader.headers().map_err(unreadable)?.clone();
    for column in OBSERVATION_COLUMNS {
        if !headers.iter().any(|h| h == column) {
            return Err(ObservationError::MissingColumn {
                path: path.display().to_string(),
                column: column.to_string(),
            });
        }
    }

    let mut report = IngestReport::default();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = match record {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(unreadable(e)),
            Err(e) => {
                report.rejected.push(RowError {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let parsed = record
            .deserialize::<ObservationRow>(Some(&headers))
            .map_err(|e| e.to_string())
            .and_then(|row| row_to_observation(row, hubs, frame, hub_tolerance));
        match parsed {
            Ok(obs) => report.observations.push(obs),
            Err(reason) => report.rejected.push(RowError { line, reason }),
        }
    }
    if !report.rejected.is_empty() {
        log::warn!(
            "{}: rejected {} of {} rows",
            path.display(),
            report.rejected.len(),
            report.rejected.len() + report.observations.len()
        );
    }
    Ok(report)
}

fn row_to_observation(
    row: ObservationRow,
    hubs: &HashMap<String, Hub>,
    frame: &Frame,
    tolerance: f64,
) -> Result<Observation, String> {
    let t = row.request_time_s;
    if !(t.is_finite() && (0.0..f64::from(SECONDS_PER_DAY)).contains(&t)) {
        return Err(format!("request time {t} outside [0, 86400)"));
    }
    if !(row.wait_s.is_finite() && row.wait_s >= 0.0) {
        return Err(format!("invalid wait {}", row.wait_s));
    }
    if !(row.in_vehicle_s.is_finite() && row.in_vehicle_s >= 0.0) {
        return Err(format!("invalid in-vehicle time {}", row.in_vehicle_s));
    }
    let hub = hubs
        .get(&row.hub_id)
        .ok_or_else(|| format!("unknown hub `{}`", row.hub_id))?;
    let origin = frame.to_plane(row.origin_lon, row.origin_lat);
    let dest = frame.to_plane(row.dest_lon, row.dest_lat);
    if !(origin.is_finite() && dest.is_finite()) {
        return Err("non-finite coordinates".to_string());
    }
    let direction = match row.direction.as_deref().map(str::trim) {
        Some(d) if !d.is_empty() => d.parse::<Direction>()?,
        _ => classify(origin, dest, std::slice::from_ref(hub), tolerance)
            .map_err(|e| e.to_string())?,
    };
    let location = match direction {
        Direction::Access => origin,
        Direction::Egress => dest,
    };
    Ok(Observation {
        request_time: t,
        location,
        hub_id: row.hub_id,
        wait: row.wait_s,
        in_vehicle: row.in_vehicle_s,
        direction,
    })
}

/// Centroids served around one hub.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederArea {
    pub hub_id: String,
    /// `None` when the hub has no usable observation.
    pub radius: Option<f64>,
    pub centroids: Vec<CellId>,
}

/// The feeder area reaches as far as the farthest observed trip endpoint of
/// the hub, and always includes the cell containing the hub itself.
/// Observations beyond `max_radius` are treated as outliers and ignored.
pub fn derive_feeder_area(
    hub: &Hub,
    observations: &[Observation],
    grid: &HexGrid,
    max_radius: Option<f64>,
) -> FeederArea {
    let radius = observations
        .iter()
        .filter(|o| o.hub_id == hub.id)
        .map(|o| distance(o.location, hub.location))
        .filter(|d| max_radius.is_none_or(|cap| *d <= cap))
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))));
    let Some(radius) = radius else {
        log::warn!("hub {} has no observations; empty feeder area", hub.id);
        return FeederArea {
            hub_id: hub.id.clone(),
            radius: None,
            centroids: Vec::new(),
        };
    };
    let own = grid.locate(hub.location).ok().map(|c| c.id);
    let centroids = grid
        .cells()
        .iter()
        .filter(|c| distance(c.center, hub.location) <= radius || Some(c.id) == own)
        .map(|c| c.id)
        .collect();
    FeederArea {
        hub_id: hub.id.clone(),
        radius: Some(radius),
        centroids,
    }
}

/// Observations of one hub and direction that fall in `[slot_start, slot_start + slot_length)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeslotDataset {
    pub hub_id: String,
    pub direction: Direction,
    pub slot_start: u32,
    pub slot_length: u32,
    pub observations: Vec<Observation>,
}

impl TimeslotDataset {
    pub fn slot_index(&self) -> usize {
        (self.slot_start / self.slot_length) as usize
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

pub fn validate_slot_length(slot_length: u32) -> Result<usize, ObservationError> {
    if slot_length == 0 || !SECONDS_PER_DAY.is_multiple_of(slot_length) {
        return Err(ObservationError::InvalidSlotLength(slot_length));
    }
    Ok((SECONDS_PER_DAY / slot_length) as usize)
}

/// Index of the half-open slot containing `t`.
pub fn slot_of(t: f64, slot_length: u32) -> usize {
    (t / f64::from(slot_length)).floor().max(0.0) as usize
}

/// Partitions observations by hub, direction and timeslot. Only non-empty
/// datasets are returned, sorted by that key; members are sorted too so the
/// result does not depend on input order.
pub fn bucket(
    observations: &[Observation],
    slot_length: u32,
) -> Result<Vec<TimeslotDataset>, ObservationError> {
    let slots = validate_slot_length(slot_length)?;
    let mut groups: BTreeMap<(String, Direction, usize), Vec<Observation>> = BTreeMap::new();
    for obs in observations {
        let slot = slot_of(obs.request_time, slot_length).min(slots - 1);
        groups
            .entry((obs.hub_id.clone(), obs.direction, slot))
            .or_default()
            .push(obs.clone());
    }
    Ok(groups
        .into_iter()
        .map(|((hub_id, direction, slot), mut members)| {
            members.sort_by(Observation::sort_key_cmp);
            TimeslotDataset {
                hub_id,
                direction,
                slot_start: slot as u32 * slot_length,
                slot_length,
                observations: members,
            }
        })
        .collect())
}
