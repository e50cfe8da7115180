//! A small synthetic scenario: a 10×10 hexagon grid in a planar frame, one
//! bus line through a hub, and feeder observations around that hub.
//!
//! The hub sits on a hexagon vertex 1 km from the nearest centroids, beyond
//! walking reach, so without the feeder service no centroid can use the bus
//! at the hub. The line's other stops are centroids well outside the feeder
//! area. All observations are access trips, so only feeder-area cells can gain.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FrameConfig, Paths, PipelineError, RunConfig};
use crate::geometry::{distance, tessellate, BBox, HexGrid, Point};
use crate::gtfs::{self, Calendar, GtfsBundle, Route, Stop, StopTime, Trip};

pub const HUB_STOP: &str = "HUB";
pub const SIDE: f64 = 1000.0;
pub const OBSERVATIONS: usize = 500;
/// Observed trips start at most this far from the hub.
pub const MAX_TRIP_DISTANCE: f64 = 2500.0;
const FEEDER_SPEED: f64 = 8.0;
const BUS_SPEED: f64 = 10.0;
const HEADWAY: u32 = 600;
const SERVICE: (u32, u32) = (5 * 3600, 23 * 3600);

#[derive(Debug, Clone)]
pub struct DemoScenario {
    pub config_path: PathBuf,
    pub config: RunConfig,
    pub hub: Point,
    /// Stops of the bus line, west to east, hub included.
    pub line: Vec<(String, Point)>,
}

/// Study area giving exactly 10 columns and 10 rows of hexagons.
pub fn study_area() -> [f64; 4] {
    [0.0, 0.0, 15.5 * SIDE, 9.75 * 3f64.sqrt() * SIDE]
}

pub fn grid() -> HexGrid {
    let [x0, y0, x1, y1] = study_area();
    tessellate(BBox::new(x0, y0, x1, y1), SIDE).expect("valid demo grid")
}

/// Writes the scenario files and a `config.toml` into `dir`.
pub fn write_demo(dir: &Path, seed: u64) -> Result<DemoScenario, PipelineError> {
    let io = |p: &Path, e| PipelineError::Io { path: p.to_path_buf(), source: e };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = grid();
    let centre_of = |col: i32, row: i32| {
        grid.cells()
            .iter()
            .find(|c| c.lattice_index() == (col, row))
            .expect("cell in demo grid")
            .center
    };
    let hub = centre_of(4, 4).translate(SIDE, 0.0);
    let line = vec![
        ("WEST".to_string(), centre_of(0, 4)),
        (HUB_STOP.to_string(), hub),
        ("EAST".to_string(), centre_of(8, 4)),
    ];

    gtfs::write_dir(&feed(&line), &dir.join("gtfs"))?;

    let opp = dir.join("opportunities.csv");
    let mut w = csv::Writer::from_path(&opp).map_err(|e| csv_err(&opp, e))?;
    w.write_record(["lon", "lat", "count", "categories"]).map_err(|e| csv_err(&opp, e))?;
    const KINDS: [&str; 5] = ["school", "clinic", "shop", "office", "park"];
    for c in grid.cells() {
        let count: u32 = rng.gen_range(50..=500);
        let kinds: Vec<&str> = KINDS.iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
        w.write_record([
            format!("{:.3}", c.center.x),
            format!("{:.3}", c.center.y),
            count.to_string(),
            kinds.join(";"),
        ])
        .map_err(|e| csv_err(&opp, e))?;
    }
    w.flush().map_err(|e| io(&opp, e))?;

    let obs = dir.join("observations.csv");
    let mut w = csv::Writer::from_path(&obs).map_err(|e| csv_err(&obs, e))?;
    let mut header: Vec<&str> = crate::observations::OBSERVATION_COLUMNS.to_vec();
    header.push("direction");
    w.write_record(&header).map_err(|e| csv_err(&obs, e))?;
    for _ in 0..OBSERVATIONS {
        // Uniform over the disc, keeping clear of the hub itself.
        let r = MAX_TRIP_DISTANCE * rng.gen_range(0.01f64..1.0).sqrt();
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let origin = hub.translate(r * theta.cos(), r * theta.sin());
        let t = rng.gen_range(SERVICE.0..SERVICE.1);
        let wait = 300.0 + rng.gen_range(-30.0..30.0);
        let ride = distance(origin, hub) / FEEDER_SPEED;
        w.write_record([
            t.to_string(),
            format!("{:.3}", origin.x),
            format!("{:.3}", origin.y),
            format!("{:.3}", hub.x),
            format!("{:.3}", hub.y),
            HUB_STOP.to_string(),
            format!("{wait:.1}"),
            format!("{ride:.1}"),
            "access".to_string(),
        ])
        .map_err(|e| csv_err(&obs, e))?;
    }
    w.flush().map_err(|e| io(&obs, e))?;

    let relative = RunConfig {
        paths: Paths {
            observations: Some("observations.csv".into()),
            gtfs: "gtfs".into(),
            opportunities: Some("opportunities.csv".into()),
            walk_overrides: None,
            out: "out".into(),
        },
        frame: FrameConfig::Planar,
        study_area: Some(study_area()),
        rng_seed: seed,
        ..RunConfig::default()
    };
    let config_path = dir.join("config.toml");
    fs::write(&config_path, relative.to_toml()).map_err(|e| io(&config_path, e))?;
    let config = RunConfig::load(&config_path)?;
    Ok(DemoScenario { config_path, config, hub, line })
}

/// One bidirectional route calling at `line` every ten minutes.
fn feed(line: &[(String, Point)]) -> GtfsBundle {
    let mut b = GtfsBundle::default();
    b.extra_files.insert(
        "agency.txt".into(),
        b"agency_id,agency_name,agency_url,agency_timezone\nDEMO,Demo Transit,https://example.org,UTC\n".to_vec(),
    );
    b.stops = line
        .iter()
        .map(|(id, p)| Stop { stop_id: id.clone(), stop_name: id.to_lowercase(), stop_lat: p.y, stop_lon: p.x })
        .collect();
    b.routes.push(Route {
        route_id: "L1".into(),
        agency_id: "DEMO".into(),
        route_short_name: "1".into(),
        route_long_name: "Crosstown".into(),
        route_type: 3,
    });
    b.calendar.push(Calendar::every_day("DAILY", "20240101", "20241231"));
    for (dir, stops) in [("E", line.to_vec()), ("W", line.iter().rev().cloned().collect())] {
        for (k, start) in (SERVICE.0..=SERVICE.1).step_by(HEADWAY as usize).enumerate() {
            let trip_id = format!("L1{dir}_{k:03}");
            b.trips.push(Trip { route_id: "L1".into(), service_id: "DAILY".into(), trip_id: trip_id.clone() });
            let mut t = start;
            for (seq, (id, p)) in stops.iter().enumerate() {
                if seq > 0 {
                    t += (distance(stops[seq - 1].1, *p) / BUS_SPEED).round() as u32;
                }
                b.stop_times.push(StopTime {
                    trip_id: trip_id.clone(),
                    arrival_time: t,
                    departure_time: t,
                    stop_id: id.clone(),
                    stop_sequence: seq as u32 + 1,
                });
            }
        }
    }
    b
}

fn csv_err(path: &Path, e: csv::Error) -> PipelineError {
    PipelineError::Artifact { path: path.to_path_buf(), reason: e.to_string() }
}
