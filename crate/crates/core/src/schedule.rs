//! Virtual lines: schedules whose headways and trip times reproduce the
//! estimated feeder waits and in-vehicle times.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{CellId, Frame, Point};
use crate::geostat::EstimateSurface;
use crate::gtfs::{Calendar, GtfsBundle, Route, Stop, StopTime, Trip};
use crate::observations::{validate_slot_length, Direction, ObservationError, SECONDS_PER_DAY};

pub const DEFAULT_WAIT_FLOOR: u32 = 30;
pub const VIRTUAL_SERVICE_ID: &str = "VL_SERVICE";
const VIRTUAL_ROUTE_TYPE: u16 = 3;

#[derive(Debug, thiserror::Error)]
pub enum ScheduleError {
    #[error("stop id {0:?} already exists in the base feed")]
    StopCollision(String),
    #[error("route id {0:?} already exists in the base feed")]
    RouteCollision(String),
    #[error("trip id {0:?} already exists in the base feed")]
    TripCollision(String),
    #[error("service id {0:?} already exists in the base feed")]
    ServiceCollision(String),
    #[error("hub {0:?} is not a stop of the base feed")]
    UnknownHub(String),
    #[error("no coordinates for centroid {0}")]
    UnknownCentroid(CellId),
    #[error("malformed virtual line {route_id:?}: {reason}")]
    Malformed { route_id: String, reason: String },
    #[error("invalid day window [{0}, {1})")]
    InvalidWindow(u32, u32),
    #[error(transparent)]
    Slot(#[from] ObservationError),
}

/// Half-open interval of seconds since midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayWindow {
    pub start: u32,
    pub end: u32,
}

impl DayWindow {
    pub const FULL_DAY: DayWindow = DayWindow { start: 0, end: SECONDS_PER_DAY };

    pub fn new(start: u32, end: u32) -> Result<Self, ScheduleError> {
        if start >= end || end > SECONDS_PER_DAY {
            return Err(ScheduleError::InvalidWindow(start, end));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, t: u32) -> bool {
        self.start <= t && t < self.end
    }
}

impl Default for DayWindow {
    fn default() -> Self {
        Self { start: 5 * 3600, end: 23 * 3600 }
    }
}

/// Rounds a nonnegative duration to whole seconds, halves going up.
pub fn round_seconds(x: f64) -> u32 {
    (x.max(0.0) + 0.5).floor() as u32
}

/// Per-slot wait and in-vehicle time of one (centroid, hub, direction) pair,
/// in whole seconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotProfile {
    pub slot_length: u32,
    pub wait: Vec<u32>,
    pub travel: Vec<u32>,
    /// Slots copied from the nearest slot with an estimate.
    pub filled: Vec<bool>,
    /// Slots whose wait was raised to the floor.
    pub floored: Vec<bool>,
}

impl SlotProfile {
    /// Builds a profile from per-slot estimates in seconds. `None` slots take
    /// the values of the nearest estimated slot, the earlier one on ties.
    /// Returns `None` if no slot has an estimate.
    pub fn from_slots(
        slot_length: u32,
        slots: &[Option<(f64, f64)>],
        wait_floor: u32,
    ) -> Result<Option<Self>, ScheduleError> {
        let n = validate_slot_length(slot_length)?;
        assert_eq!(slots.len(), n, "one entry per slot");
        let known: Vec<usize> = (0..n).filter(|&i| slots[i].is_some()).collect();
        if known.is_empty() {
            return Ok(None);
        }
        let mut p = SlotProfile {
            slot_length,
            wait: Vec::with_capacity(n),
            travel: Vec::with_capacity(n),
            filled: Vec::with_capacity(n),
            floored: Vec::with_capacity(n),
        };
        for i in 0..n {
            let src = match slots[i] {
                Some(_) => i,
                None => *known
                    .iter()
                    .min_by_key(|&&k| (k.abs_diff(i), k))
                    .expect("known is non-empty"),
            };
            let (w, y) = slots[src].expect("source slot is estimated");
            let w = round_seconds(w);
            p.wait.push(w.max(wait_floor.max(1)));
            p.floored.push(w < wait_floor.max(1));
            p.travel.push(round_seconds(y).max(1));
            p.filled.push(src != i);
        }
        Ok(Some(p))
    }

    /// Gathers the estimates of `centroid` from the surfaces of one hub and
    /// direction.
    pub fn from_surfaces<'a>(
        centroid: CellId,
        surfaces: impl IntoIterator<Item = &'a EstimateSurface>,
        slot_length: u32,
        wait_floor: u32,
    ) -> Result<Option<Self>, ScheduleError> {
        let n = validate_slot_length(slot_length)?;
        let mut slots = vec![None; n];
        for s in surfaces {
            if s.slot_length != slot_length {
                continue;
            }
            if let Some(e) = s.estimates.get(&centroid) {
                slots[(s.slot_start / slot_length) as usize] = Some((e.wait, e.travel));
            }
        }
        Self::from_slots(slot_length, &slots, wait_floor)
    }

    pub fn constant(slot_length: u32, wait: u32, travel: u32) -> Self {
        let n = (SECONDS_PER_DAY / slot_length) as usize;
        SlotProfile {
            slot_length,
            wait: vec![wait; n],
            travel: vec![travel; n],
            filled: vec![false; n],
            floored: vec![false; n],
        }
    }

    fn slot(&self, t: u32) -> usize {
        ((t / self.slot_length) as usize).min(self.wait.len() - 1)
    }

    pub fn wait_at(&self, t: u32) -> u32 {
        self.wait[self.slot(t)]
    }

    /// Headway `2·ŵ` of the slot containing `t`.
    pub fn headway_at(&self, t: u32) -> u32 {
        2 * self.wait_at(t)
    }

    pub fn travel_at(&self, t: u32) -> u32 {
        self.travel[self.slot(t)]
    }

    pub fn any_floored(&self) -> bool {
        self.floored.iter().any(|&f| f)
    }

    pub fn any_filled(&self) -> bool {
        self.filled.iter().any(|&f| f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualTrip {
    pub origin_stop: String,
    pub destination_stop: String,
    pub depart: u32,
    pub arrive: u32,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualLine {
    pub centroid_id: CellId,
    pub hub_id: String,
    pub direction: Direction,
    /// Ordered by departure.
    pub trips: Vec<VirtualTrip>,
}

pub fn centroid_stop_id(id: CellId) -> String {
    format!("C{id}")
}

pub fn route_id(direction: Direction, centroid: CellId, hub_id: &str) -> String {
    format!("VL_{}_{}_{}", direction.as_str(), centroid, hub_id)
}

impl VirtualLine {
    pub fn route_id(&self) -> String {
        route_id(self.direction, self.centroid_id, &self.hub_id)
    }

    pub fn trip_id(&self, index: usize) -> String {
        format!("{}_{index:04}", self.route_id())
    }
}

/// Anchor `t_0` of a line, uniform over the day and fixed by `(seed, route id)`.
pub fn anchor_for(seed: u64, route_id: &str) -> u32 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(route_id.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key).gen_range(0..SECONDS_PER_DAY)
}

/// Departure times generated from `anchor`, ascending.
///
/// Forward: `t_j = t_{j−1} + 2·ŵ(slot(t_{j−1}))` while `t_j` is before the
/// window end. Backward: `t_j = t_{j+1} − 2·ŵ(slot(t_{j+1}))` while `t_j` is
/// not before the window start. Only times inside the window are kept; the
/// anchor itself may lie outside it.
pub fn departures(profile: &SlotProfile, anchor: u32, window: DayWindow) -> Vec<u32> {
    let mut out = Vec::new();
    let mut t = i64::from(anchor);
    let (start, end) = (i64::from(window.start), i64::from(window.end));
    while t >= start {
        if t < end {
            out.push(t as u32);
        }
        t -= i64::from(profile.headway_at(t as u32));
    }
    out.reverse();
    let mut t = i64::from(anchor) + i64::from(profile.headway_at(anchor));
    while t < end {
        if t >= start {
            out.push(t as u32);
        }
        t += i64::from(profile.headway_at(t as u32));
    }
    out
}

fn endpoints(centroid: CellId, hub_id: &str, direction: Direction) -> (String, String) {
    let c = centroid_stop_id(centroid);
    match direction {
        Direction::Access => (c, hub_id.to_string()),
        Direction::Egress => (hub_id.to_string(), c),
    }
}

fn trip_at(origin: &str, destination: &str, direction: Direction, profile: &SlotProfile, depart: u32) -> Option<VirtualTrip> {
    let arrive = depart + profile.travel_at(depart);
    (arrive < SECONDS_PER_DAY).then(|| VirtualTrip {
        origin_stop: origin.to_string(),
        destination_stop: destination.to_string(),
        depart,
        arrive,
        direction,
    })
}

/// Type-1 line: headway-spaced trips over the window. Access lines run
/// centroid → hub and egress lines hub → centroid. Trips that would arrive
/// after midnight are dropped.
pub fn synthesize_line(
    centroid: CellId,
    hub_id: &str,
    direction: Direction,
    profile: &SlotProfile,
    anchor: u32,
    window: DayWindow,
) -> VirtualLine {
    let (o, d) = endpoints(centroid, hub_id, direction);
    let trips = departures(profile, anchor, window)
        .into_iter()
        .filter_map(|t| trip_at(&o, &d, direction, profile, t))
        .collect();
    VirtualLine {
        centroid_id: centroid,
        hub_id: hub_id.to_string(),
        direction,
        trips,
    }
}

/// Type-2 trip: departs exactly at `query_time` with no wait encoded.
pub fn synthesize_type2_trip(
    centroid: CellId,
    hub_id: &str,
    direction: Direction,
    query_time: u32,
    profile: &SlotProfile,
) -> Option<VirtualTrip> {
    let (o, d) = endpoints(centroid, hub_id, direction);
    trip_at(&o, &d, direction, profile, query_time)
}

/// Type-2 line holding one trip per query time.
pub fn synthesize_type2_line(
    centroid: CellId,
    hub_id: &str,
    direction: Direction,
    query_times: &[u32],
    profile: &SlotProfile,
) -> VirtualLine {
    let times: BTreeSet<u32> = query_times.iter().copied().collect();
    VirtualLine {
        centroid_id: centroid,
        hub_id: hub_id.to_string(),
        direction,
        trips: times
            .into_iter()
            .filter_map(|t| synthesize_type2_trip(centroid, hub_id, direction, t, profile))
            .collect(),
    }
}

/// Merges virtual lines into a copy of `base`. Centroid stops are added at
/// their centroid coordinates in the input frame.
pub fn write_gtfs(
    base: &GtfsBundle,
    lines: &[VirtualLine],
    centroids: &BTreeMap<CellId, Point>,
    frame: &Frame,
) -> Result<GtfsBundle, ScheduleError> {
    let mut out = base.clone();
    out.canonicalize();
    if lines.is_empty() {
        return Ok(out);
    }
    let base_stops: HashSet<&str> = base.stops.iter().map(|s| s.stop_id.as_str()).collect();
    let base_routes: HashSet<&str> = base.routes.iter().map(|r| r.route_id.as_str()).collect();
    let base_trips: HashSet<&str> = base.trips.iter().map(|t| t.trip_id.as_str()).collect();
    if base.calendar.iter().any(|c| c.service_id == VIRTUAL_SERVICE_ID)
        || base.trips.iter().any(|t| t.service_id == VIRTUAL_SERVICE_ID)
    {
        return Err(ScheduleError::ServiceCollision(VIRTUAL_SERVICE_ID.into()));
    }

    let mut new_stops = BTreeSet::new();
    for line in lines {
        if !base_stops.contains(line.hub_id.as_str()) {
            return Err(ScheduleError::UnknownHub(line.hub_id.clone()));
        }
        let stop = centroid_stop_id(line.centroid_id);
        if base_stops.contains(stop.as_str()) {
            return Err(ScheduleError::StopCollision(stop));
        }
        if !centroids.contains_key(&line.centroid_id) {
            return Err(ScheduleError::UnknownCentroid(line.centroid_id));
        }
        new_stops.insert(line.centroid_id);
        let rid = line.route_id();
        if base_routes.contains(rid.as_str()) {
            return Err(ScheduleError::RouteCollision(rid));
        }
        out.routes.push(Route {
            route_id: rid.clone(),
            agency_id: String::new(),
            route_short_name: rid.clone(),
            route_long_name: String::new(),
            route_type: VIRTUAL_ROUTE_TYPE,
        });
        for (j, trip) in line.trips.iter().enumerate() {
            let tid = line.trip_id(j);
            if base_trips.contains(tid.as_str()) {
                return Err(ScheduleError::TripCollision(tid));
            }
            out.trips.push(Trip {
                route_id: rid.clone(),
                service_id: VIRTUAL_SERVICE_ID.into(),
                trip_id: tid.clone(),
            });
            for (seq, (stop_id, t)) in [(&trip.origin_stop, trip.depart), (&trip.destination_stop, trip.arrive)]
                .into_iter()
                .enumerate()
            {
                out.stop_times.push(StopTime {
                    trip_id: tid.clone(),
                    arrival_time: t,
                    departure_time: t,
                    stop_id: stop_id.clone(),
                    stop_sequence: seq as u32,
                });
            }
        }
    }
    for id in new_stops {
        let (lon, lat) = frame.to_input(centroids[&id]);
        out.stops.push(Stop {
            stop_id: centroid_stop_id(id),
            stop_name: format!("centroid {id}"),
            stop_lat: lat,
            stop_lon: lon,
        });
    }
    let start = base.calendar.iter().map(|c| c.start_date.as_str()).min().unwrap_or("20000101");
    let end = base.calendar.iter().map(|c| c.end_date.as_str()).max().unwrap_or("20991231");
    out.calendar.push(Calendar::every_day(VIRTUAL_SERVICE_ID, start, end));
    out.canonicalize();
    Ok(out)
}

/// Recovers the virtual lines stored in a bundle, ordered by route id.
pub fn read_virtual_lines(bundle: &GtfsBundle) -> Result<Vec<VirtualLine>, ScheduleError> {
    let by_trip = bundle.stop_times_by_trip();
    let mut trips_by_route: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for t in &bundle.trips {
        trips_by_route.entry(&t.route_id).or_default().push(&t.trip_id);
    }
    let mut routes: Vec<&Route> = bundle.routes.iter().filter(|r| r.route_id.starts_with("VL_")).collect();
    routes.sort_by(|a, b| a.route_id.cmp(&b.route_id));
    let mut lines = Vec::new();
    for r in routes {
        let bad = |reason: &str| ScheduleError::Malformed { route_id: r.route_id.clone(), reason: reason.into() };
        let mut parts = r.route_id.splitn(4, '_');
        parts.next();
        let direction: Direction = parts.next().ok_or_else(|| bad("no direction"))?.parse().map_err(|_| bad("bad direction"))?;
        let centroid = parts
            .next()
            .and_then(|c| c.parse().ok())
            .map(CellId)
            .ok_or_else(|| bad("bad centroid"))?;
        let hub_id = parts.next().ok_or_else(|| bad("no hub"))?.to_string();
        let mut trips = Vec::new();
        for tid in trips_by_route.get(r.route_id.as_str()).into_iter().flatten() {
            let sts = by_trip.get(tid).ok_or_else(|| bad("trip without stop times"))?;
            let [a, b] = sts.as_slice() else {
                return Err(bad("virtual trips have exactly two stop times"));
            };
            trips.push(VirtualTrip {
                origin_stop: a.stop_id.clone(),
                destination_stop: b.stop_id.clone(),
                depart: a.departure_time,
                arrive: b.arrival_time,
                direction,
            });
        }
        trips.sort_by_key(|t| (t.depart, t.arrive));
        lines.push(VirtualLine { centroid_id: centroid, hub_id, direction, trips });
    }
    Ok(lines)
}
