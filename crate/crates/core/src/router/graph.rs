use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RouterError;
use crate::geometry::{distance, Frame, Point};
use crate::gtfs::{GtfsBundle, Weekday};

/// Straight-line walking with a detour factor, capped per leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkModel {
    /// Meters per second.
    pub speed: f64,
    pub detour: f64,
    /// Longest single walk leg, seconds.
    pub max_walk: f64,
}

impl Default for WalkModel {
    fn default() -> Self {
        Self { speed: 1.25, detour: 1.3, max_walk: 900.0 }
    }
}

impl WalkModel {
    pub fn validate(&self) -> Result<(), RouterError> {
        let ok = self.speed.is_finite()
            && self.speed > 0.0
            && self.detour.is_finite()
            && self.detour >= 1.0
            && self.max_walk > 0.0
            && !self.max_walk.is_nan();
        if ok {
            Ok(())
        } else {
            Err(RouterError::InvalidWalkModel(*self))
        }
    }

    pub fn time(&self, a: Point, b: Point) -> f64 {
        distance(a, b) * self.detour / self.speed
    }

    /// Walk time if it is within the cap.
    pub fn leg(&self, a: Point, b: Point) -> Option<f64> {
        let t = self.time(a, b);
        (t <= self.max_walk).then_some(t)
    }

    /// Straight-line reach of one leg, meters.
    pub fn radius(&self) -> f64 {
        self.max_walk * self.speed / self.detour
    }
}

/// Stop-to-stop walk times that replace the straight-line model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WalkOverrides {
    pub seconds: HashMap<(String, String), f64>,
}

impl WalkOverrides {
    /// Reads `from_stop,to_stop,seconds` rows. Pairs are directed.
    pub fn read_csv(path: &Path) -> Result<Self, RouterError> {
        #[derive(Deserialize)]
        struct Row {
            from_stop: String,
            to_stop: String,
            seconds: f64,
        }
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| RouterError::Overrides(format!("{}: {e}", path.display())))?;
        let mut seconds = HashMap::new();
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| RouterError::Overrides(format!("{} line {}: {e}", path.display(), i + 2)))?;
            if !(row.seconds.is_finite() && row.seconds >= 0.0) {
                return Err(RouterError::Overrides(format!(
                    "{} line {}: seconds must be nonnegative",
                    path.display(),
                    i + 2
                )));
            }
            seconds.insert((row.from_stop, row.to_stop), row.seconds);
        }
        Ok(Self { seconds })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphOptions {
    pub walk: WalkModel,
    pub overrides: Option<WalkOverrides>,
    /// Keep only trips whose calendar runs on this day. Trips without a
    /// calendar row are kept.
    pub weekday: Option<Weekday>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopNode {
    pub stop_id: String,
    pub location: Point,
}

/// A stoptime: one vehicle passage at one stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stoptime {
    pub stop: u32,
    pub trip: u32,
    pub arrival: u32,
    pub departure: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripInfo {
    pub trip_id: String,
    pub route_id: String,
    pub first_node: u32,
    pub len: u32,
}

/// A ride between two consecutive stoptimes of one trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connection {
    pub from_stop: u32,
    pub to_stop: u32,
    pub departure: u32,
    pub arrival: u32,
    pub trip: u32,
    /// Node of the departing stoptime; the arriving one is `from_node + 1`.
    pub from_node: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footpath {
    pub to: u32,
    pub seconds: f64,
}

/// A change from one stoptime to the earliest boardable stoptime of another trip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferArc {
    pub from: u32,
    pub to: u32,
    pub walk: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedTrip {
    pub trip_id: String,
    pub reason: String,
}

/// Uniform bucket grid over stop locations.
#[derive(Debug, Clone)]
struct StopIndex {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<u32>>,
}

impl StopIndex {
    fn new(stops: &[StopNode], radius: f64) -> Self {
        let cell = if radius.is_finite() && radius > 0.0 { radius } else { f64::INFINITY };
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, s) in stops.iter().enumerate() {
            buckets.entry(Self::key(cell, s.location)).or_default().push(i as u32);
        }
        Self { cell, buckets }
    }

    fn key(cell: f64, p: Point) -> (i64, i64) {
        if cell.is_infinite() {
            (0, 0)
        } else {
            ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
        }
    }

    /// Candidate stops within one bucket of `p`, ascending.
    fn candidates(&self, p: Point) -> Vec<u32> {
        let (kx, ky) = Self::key(self.cell, p);
        let span = if self.cell.is_infinite() { 0 } else { 1 };
        let mut out = Vec::new();
        for dx in -span..=span {
            for dy in -span..=span {
                if let Some(v) = self.buckets.get(&(kx + dx, ky + dy)) {
                    out.extend_from_slice(v);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Time-expanded graph: stoptime nodes, implicit in-vehicle arcs between
/// consecutive stoptimes of a trip, and walking transfers between stops.
#[derive(Debug, Clone)]
pub struct TimeExpandedGraph {
    pub stops: Vec<StopNode>,
    pub stop_index: HashMap<String, u32>,
    /// Grouped by trip, in stop sequence order.
    pub nodes: Vec<Stoptime>,
    pub trips: Vec<TripInfo>,
    /// Sorted by (departure, arrival, trip, node).
    pub connections: Vec<Connection>,
    /// Per stop, reachable stops including itself at 0 s, ascending by stop.
    pub footpaths: Vec<Vec<Footpath>>,
    /// Per stop, boardable nodes sorted by (departure, node).
    pub boardable: Vec<Vec<u32>>,
    pub walk: WalkModel,
    pub rejected: Vec<RejectedTrip>,
    spatial: StopIndex,
}

impl TimeExpandedGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn is_first(&self, node: u32) -> bool {
        self.trips[self.nodes[node as usize].trip as usize].first_node == node
    }

    fn is_last(&self, node: u32) -> bool {
        let t = &self.trips[self.nodes[node as usize].trip as usize];
        node == t.first_node + t.len - 1
    }

    pub fn can_board(&self, node: u32) -> bool {
        !self.is_last(node)
    }

    pub fn can_alight(&self, node: u32) -> bool {
        !self.is_first(node)
    }

    /// In-vehicle arcs as `(from, to)` node pairs.
    pub fn in_vehicle_arcs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.connections.iter().map(|c| (c.from_node, c.from_node + 1))
    }

    /// Transfer arcs leaving `node`: to every stop within walking reach, the
    /// earliest boardable stoptime of each other trip with `t + walk ≤ t'`.
    pub fn transfer_arcs(&self, node: u32) -> Vec<TransferArc> {
        let mut out = Vec::new();
        if !self.can_alight(node) {
            return out;
        }
        let st = self.nodes[node as usize];
        for fp in &self.footpaths[st.stop as usize] {
            let ready = f64::from(st.arrival) + fp.seconds;
            let list = &self.boardable[fp.to as usize];
            let first = list.partition_point(|&n| f64::from(self.nodes[n as usize].departure) < ready);
            let mut seen = HashSet::new();
            for &n in &list[first..] {
                let trip = self.nodes[n as usize].trip;
                if trip != st.trip && seen.insert(trip) {
                    out.push(TransferArc { from: node, to: n, walk: fp.seconds });
                }
            }
        }
        out
    }

    /// Stops within one walk leg of `p`, with their walk times, ascending by stop.
    pub fn stops_near(&self, p: Point) -> Vec<(u32, f64)> {
        self.spatial
            .candidates(p)
            .into_iter()
            .filter_map(|s| self.walk.leg(p, self.stops[s as usize].location).map(|t| (s, t)))
            .collect()
    }
}

/// Builds the graph. Trips with fewer than two stoptimes or with times going
/// backward are rejected and listed in `rejected`; an unknown stop is fatal.
pub fn build_graph(bundle: &GtfsBundle, frame: &Frame, options: &GraphOptions) -> Result<TimeExpandedGraph, RouterError> {
    options.walk.validate()?;
    let mut stop_list: Vec<&crate::gtfs::Stop> = bundle.stops.iter().collect();
    stop_list.sort_by(|a, b| a.stop_id.cmp(&b.stop_id));
    let mut stops = Vec::with_capacity(stop_list.len());
    let mut stop_index = HashMap::new();
    for s in stop_list {
        let location = frame.to_plane(s.stop_lon, s.stop_lat);
        if !location.is_finite() {
            return Err(RouterError::BadStop(s.stop_id.clone()));
        }
        if stop_index.insert(s.stop_id.clone(), stops.len() as u32).is_some() {
            return Err(RouterError::DuplicateStop(s.stop_id.clone()));
        }
        stops.push(StopNode { stop_id: s.stop_id.clone(), location });
    }

    let running: Option<HashSet<&str>> = options.weekday.map(|day| {
        bundle
            .calendar
            .iter()
            .filter(|c| !c.runs_on(day))
            .map(|c| c.service_id.as_str())
            .collect()
    });
    let by_trip = bundle.stop_times_by_trip();
    let mut trip_rows: Vec<&crate::gtfs::Trip> = bundle.trips.iter().collect();
    trip_rows.sort_by(|a, b| a.trip_id.cmp(&b.trip_id));

    let mut nodes = Vec::new();
    let mut trips = Vec::new();
    let mut rejected = Vec::new();
    for t in trip_rows {
        if let Some(excluded) = &running {
            if excluded.contains(t.service_id.as_str()) {
                continue;
            }
        }
        let sts = by_trip.get(t.trip_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let mut reject = |reason: String| rejected.push(RejectedTrip { trip_id: t.trip_id.clone(), reason });
        if sts.len() < 2 {
            reject(format!("{} stop times", sts.len()));
            continue;
        }
        let mut ok = true;
        for (i, st) in sts.iter().enumerate() {
            if st.departure_time < st.arrival_time {
                reject(format!("departs before arriving at sequence {}", st.stop_sequence));
                ok = false;
                break;
            }
            if i > 0 && st.arrival_time < sts[i - 1].departure_time {
                reject(format!("time decreases at sequence {}", st.stop_sequence));
                ok = false;
                break;
            }
            if i > 0 && st.stop_sequence == sts[i - 1].stop_sequence {
                reject(format!("repeated sequence {}", st.stop_sequence));
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let trip_idx = trips.len() as u32;
        let first_node = nodes.len() as u32;
        for st in sts {
            let stop = *stop_index
                .get(&st.stop_id)
                .ok_or_else(|| RouterError::UnknownStop { trip_id: t.trip_id.clone(), stop_id: st.stop_id.clone() })?;
            nodes.push(Stoptime { stop, trip: trip_idx, arrival: st.arrival_time, departure: st.departure_time });
        }
        trips.push(TripInfo {
            trip_id: t.trip_id.clone(),
            route_id: t.route_id.clone(),
            first_node,
            len: sts.len() as u32,
        });
    }
    for r in &rejected {
        log::warn!("trip {} rejected: {}", r.trip_id, r.reason);
    }

    let mut connections = Vec::new();
    let mut boardable = vec![Vec::new(); stops.len()];
    for (ti, trip) in trips.iter().enumerate() {
        for k in 0..trip.len - 1 {
            let n = trip.first_node + k;
            let (a, b) = (nodes[n as usize], nodes[n as usize + 1]);
            connections.push(Connection {
                from_stop: a.stop,
                to_stop: b.stop,
                departure: a.departure,
                arrival: b.arrival,
                trip: ti as u32,
                from_node: n,
            });
            boardable[a.stop as usize].push(n);
        }
    }
    connections.sort_by_key(|c| (c.departure, c.arrival, c.trip, c.from_node));
    for list in &mut boardable {
        list.sort_by_key(|&n| (nodes[n as usize].departure, n));
    }

    let spatial = StopIndex::new(&stops, options.walk.radius());
    let mut footpaths: Vec<BTreeMap<u32, f64>> = stops
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut m: BTreeMap<u32, f64> = spatial
                .candidates(s.location)
                .into_iter()
                .filter_map(|j| options.walk.leg(s.location, stops[j as usize].location).map(|t| (j, t)))
                .collect();
            m.insert(i as u32, 0.0);
            m
        })
        .collect();
    if let Some(ov) = &options.overrides {
        let mut pairs: Vec<_> = ov.seconds.iter().collect();
        pairs.sort_by(|a, b| a.0.cmp(b.0));
        for ((from, to), &secs) in pairs {
            let (Some(&i), Some(&j)) = (stop_index.get(from), stop_index.get(to)) else {
                log::warn!("walk override {from} -> {to} names an unknown stop");
                continue;
            };
            if i == j {
                continue;
            }
            if secs <= options.walk.max_walk {
                footpaths[i as usize].insert(j, secs);
            } else {
                footpaths[i as usize].remove(&j);
            }
        }
    }
    let footpaths = footpaths
        .into_iter()
        .map(|m| m.into_iter().map(|(to, seconds)| Footpath { to, seconds }).collect())
        .collect();

    Ok(TimeExpandedGraph {
        stops,
        stop_index,
        nodes,
        trips,
        connections,
        footpaths,
        boardable,
        walk: options.walk,
        rejected,
        spatial,
    })
}
