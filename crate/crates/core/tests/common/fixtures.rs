//! Scenario builders shared by the oracle tests and the acceptance suite.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sms_access_core::geometry::{tessellate, BBox, CellId, Point};
use sms_access_core::geostat::{
    estimate_surface, CellEstimate, EstimateFlags, EstimateSurface, EstimationParams, FieldDiagnostics,
};
use sms_access_core::gtfs::{GtfsBundle, Route, Stop, StopTime, Trip};
use sms_access_core::observations::{Direction, Observation, TimeslotDataset};
use sms_access_core::schedule::{synthesize_line, DayWindow, SlotProfile, VirtualLine};

/// A one-centroid surface for hub `H` holding the given wait and travel.
pub fn surface(slot: usize, slot_length: u32, centroid: CellId, (wait, travel): (f64, f64)) -> EstimateSurface {
    let diag = FieldDiagnostics { variogram: None, fit: None, fallback: None, mean: 0.0 };
    EstimateSurface {
        hub_id: "H".into(),
        direction: Direction::Access,
        slot_start: slot as u32 * slot_length,
        slot_length,
        estimates: BTreeMap::from([(
            centroid,
            CellEstimate { wait, travel, support: 10, flags: EstimateFlags::default() },
        )]),
        unestimable: vec![],
        wait_diagnostics: diag.clone(),
        travel_diagnostics: diag,
    }
}

/// Up to five lines between random centroids and the given hubs.
pub fn random_lines(rng: &mut ChaCha8Rng, hubs: &[&str]) -> (Vec<VirtualLine>, BTreeMap<CellId, Point>) {
    let mut lines = Vec::new();
    let mut centroids = BTreeMap::new();
    for _ in 0..rng.gen_range(0..6) {
        let c = CellId(rng.gen_range(0..40));
        centroids.insert(c, Point::new(rng.gen_range(-5e3..5e3), rng.gen_range(-5e3..5e3)));
        let hub = hubs[rng.gen_range(0..hubs.len())];
        let dir = if rng.gen_bool(0.5) { Direction::Access } else { Direction::Egress };
        if lines.iter().any(|l: &VirtualLine| l.centroid_id == c && l.hub_id == hub && l.direction == dir) {
            continue;
        }
        let slots: Vec<_> = super::random_slots(rng, 24).into_iter().map(Some).collect();
        let profile = SlotProfile::from_slots(3600, &slots, 30).unwrap().unwrap();
        lines.push(synthesize_line(c, hub, dir, &profile, rng.gen_range(0..86_400), DayWindow::default()));
    }
    lines.sort_by_key(VirtualLine::route_id);
    (lines, centroids)
}

/// Two stops near (2.17, 48.71) and one trip running past midnight.
pub fn base_feed() -> GtfsBundle {
    let stop = |id: &str, lon: f64, lat: f64| Stop { stop_id: id.into(), stop_name: id.into(), stop_lat: lat, stop_lon: lon };
    GtfsBundle {
        stops: vec![stop("HUB_1", 2.17, 48.71), stop("S2", 2.2, 48.72)],
        routes: vec![Route {
            route_id: "R1".into(),
            agency_id: String::new(),
            route_short_name: "1".into(),
            route_long_name: String::new(),
            route_type: 3,
        }],
        trips: vec![Trip { route_id: "R1".into(), service_id: "WK".into(), trip_id: "R1_a".into() }],
        stop_times: vec![
            StopTime { trip_id: "R1_a".into(), arrival_time: 90_000, departure_time: 90_000, stop_id: "HUB_1".into(), stop_sequence: 1 },
            StopTime { trip_id: "R1_a".into(), arrival_time: 90_600, departure_time: 90_660, stop_id: "S2".into(), stop_sequence: 2 },
        ],
        calendar: vec![],
        extra_files: BTreeMap::new(),
    }
}

pub const RAMP_SIDE: f64 = 10_000.0;

/// Wait rising linearly from 120 s to 600 s across the square.
pub fn ramp(x: f64) -> f64 {
    120.0 + 480.0 * x / RAMP_SIDE
}

/// Kriges 200 ramp samples onto a 500 m grid and returns the worst error at
/// centroids with at least three samples in range, and how many there were.
pub fn ramp_worst_error(seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let observations = (0..200)
        .map(|_| {
            let p = Point::new(rng.gen_range(0.0..RAMP_SIDE), rng.gen_range(0.0..RAMP_SIDE));
            Observation {
                request_time: 0.0,
                location: p,
                hub_id: "H".into(),
                wait: ramp(p.x),
                in_vehicle: 600.0,
                direction: Direction::Access,
            }
        })
        .collect();
    let ds = TimeslotDataset {
        hub_id: "H".into(),
        direction: Direction::Access,
        slot_start: 0,
        slot_length: 3600,
        observations,
    };
    let grid = tessellate(BBox::new(0.0, 0.0, RAMP_SIDE, RAMP_SIDE), 500.0).unwrap();
    let centroids: Vec<_> = grid.centroids().collect();
    let surface = estimate_surface(&ds, &centroids, &EstimationParams::default()).unwrap();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (id, p) in &centroids {
        let e = surface.estimates[id];
        if e.support >= 3 {
            worst = worst.max((e.wait - ramp(p.x)).abs());
            checked += 1;
        }
    }
    (worst, checked)
}
