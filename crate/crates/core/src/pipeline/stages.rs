use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{json, Map};
use sha2::{Digest, Sha256};

use super::manifest::{Failure, RunManifest, StageRecord, StageStatus, MANIFEST_FILE};
use super::{PipelineError, RunConfig, Stage};
use crate::accessibility::{
    compare, daily_average, improvement_geojson, read_scores_csv, score_all, summarize, write_improvement_csv,
    write_scores_csv,
};
use crate::geometry::{tessellate, BBox, CellId, Frame, HexGrid, OpportunityPoint, Point};
use crate::geostat::{estimate_surface, write_surface_csv, write_variogram_csv, EstimateSurface};
use crate::gtfs::{self, GtfsBundle};
use crate::observations::{bucket, derive_feeder_area, ingest, Direction, FeederArea, Hub};
use crate::router::{build_graph, travel_time_matrix, GraphOptions, TravelTimeMatrix, WalkOverrides};
use crate::schedule::{anchor_for, route_id, synthesize_line, synthesize_type2_line, write_gtfs, SlotProfile, VirtualLine};

/// Output file names, relative to the output directory.
pub mod artifacts {
    pub const GRID: &str = "grid.json";
    pub const GRID_GEOJSON: &str = "grid.geojson";
    pub const SURFACES: &str = "surfaces.json";
    pub const SURFACE_DIR: &str = "surfaces";
    pub const REJECTED_OBSERVATIONS: &str = "observations_rejected.csv";
    pub const GTFS_DIR: &str = "gtfs";
    pub const MATRIX_BASELINE: &str = "matrix_baseline.bin";
    pub const MATRIX_SMS: &str = "matrix_sms.bin";
    pub const SCORES_BASELINE: &str = "scores_baseline.csv";
    pub const SCORES: &str = "scores.csv";
    pub const IMPROVEMENT: &str = "improvement.csv";
    pub const IMPROVEMENT_GEOJSON: &str = "improvement.geojson";
    pub const SUMMARY: &str = "summary.json";
    pub const STAMP_DIR: &str = ".stamps";
}
use artifacts as a;

fn outputs(stage: Stage) -> &'static [&'static str] {
    match stage {
        Stage::Tessellate => &[a::GRID, a::GRID_GEOJSON],
        Stage::Estimate => &[a::SURFACES, a::SURFACE_DIR, a::REJECTED_OBSERVATIONS],
        Stage::Synthesize => &[a::GTFS_DIR],
        Stage::Route => &[a::MATRIX_BASELINE, a::MATRIX_SMS],
        Stage::Score => &[a::SCORES_BASELINE, a::SCORES],
        Stage::Compare => &[a::IMPROVEMENT, a::IMPROVEMENT_GEOJSON, a::SUMMARY],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellContent {
    pub id: CellId,
    pub opportunities: f64,
    pub categories: BTreeSet<String>,
}

/// The tessellation with its frame, enough to rebuild the grid exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridArtifact {
    pub frame: Frame,
    pub bounds: BBox,
    pub side: f64,
    pub cells: Vec<CellContent>,
}

impl GridArtifact {
    fn from_grid(frame: Frame, grid: &HexGrid) -> Self {
        Self {
            frame,
            bounds: grid.bounds(),
            side: grid.side(),
            cells: grid
                .cells()
                .iter()
                .map(|c| CellContent { id: c.id, opportunities: c.opportunities, categories: c.categories.clone() })
                .collect(),
        }
    }

    pub fn grid(&self) -> Result<HexGrid, PipelineError> {
        let mut g = tessellate(self.bounds, self.side)?;
        if g.len() != self.cells.len() {
            return Err(PipelineError::Artifact {
                path: a::GRID.into(),
                reason: format!("{} cells stored, tessellation gives {}", self.cells.len(), g.len()),
            });
        }
        let counts: Vec<f64> = self.cells.iter().map(|c| c.opportunities).collect();
        g.set_opportunities(&counts);
        let labels: Vec<OpportunityPoint> = g
            .cells()
            .iter()
            .zip(&self.cells)
            .filter(|(_, c)| !c.categories.is_empty())
            .map(|(cell, c)| OpportunityPoint { location: cell.center, count: 0.0, categories: c.categories.clone() })
            .collect();
        g.assign_opportunities(labels);
        Ok(g)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SurfaceArtifact {
    pub feeder_areas: Vec<FeederArea>,
    pub surfaces: Vec<EstimateSurface>,
}

#[derive(Serialize, Deserialize)]
struct StampFile {
    stamp: String,
    record: StageRecord,
}

struct Ctx<'c> {
    cfg: &'c RunConfig,
    out: PathBuf,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn grid(&self) -> Result<(GridArtifact, HexGrid), PipelineError> {
        let art: GridArtifact = read_json(&self.path(a::GRID))?;
        let grid = art.grid()?;
        Ok((art, grid))
    }

    fn base_feed(&self) -> Result<GtfsBundle, PipelineError> {
        Ok(gtfs::read_dir(&self.cfg.paths.gtfs)?)
    }
}

/// Brings every stage up to and including `target` up to date and writes the
/// run manifest. A stage is skipped when its stamp matches and its outputs
/// exist, unless `force` is set.
pub fn run(cfg: &RunConfig, target: Stage, force: bool) -> Result<RunManifest, PipelineError> {
    let out = cfg.paths.out.clone();
    fs::create_dir_all(out.join(a::STAMP_DIR)).map_err(|e| io_err(&out, e))?;
    let mut manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        rng_seed: cfg.rng_seed,
        workers: 0,
        stages: Vec::new(),
        failure: None,
    };
    let pool = cfg.validate().and_then(|()| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cfg.workers {
            builder = builder.num_threads(n);
        }
        builder.build().map_err(|e| PipelineError::Pool(e.to_string()))
    });
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            manifest.failure = Some(Failure { stage: "config".into(), message: e.to_string() });
            write_json(&out.join(MANIFEST_FILE), &manifest)?;
            return Err(e);
        }
    };
    manifest.workers = pool.current_num_threads();
    let ctx = Ctx { cfg, out };
    let result = pool.install(|| {
        let mut upstream = String::new();
        for &stage in target.chain() {
            let started = Instant::now();
            let outcome = stamp(&ctx, stage, &upstream).and_then(|s| {
                let cached = if force { None } else { cached_record(&ctx, stage, &s) };
                match cached {
                    Some(mut rec) => {
                        rec.status = StageStatus::Cached;
                        log::info!("{stage}: up to date");
                        Ok(rec)
                    }
                    None => {
                        log::info!("{stage}: running");
                        let mut rec = StageRecord::new(stage.name());
                        execute(&ctx, stage, &mut rec)?;
                        rec.stamp = s.clone();
                        write_json(
                            &ctx.path(a::STAMP_DIR).join(format!("{stage}.json")),
                            &StampFile { stamp: s, record: rec.clone() },
                        )?;
                        Ok(rec)
                    }
                }
            });
            match outcome {
                Ok(mut rec) => {
                    rec.seconds = started.elapsed().as_secs_f64();
                    upstream = rec.stamp.clone();
                    manifest.stages.push(rec);
                }
                Err(e) => {
                    let _ = fs::remove_file(ctx.path(a::STAMP_DIR).join(format!("{stage}.json")));
                    log::error!("{stage} failed: {e}");
                    manifest.failure = Some(Failure { stage: stage.name().into(), message: e.to_string() });
                    return Err(e);
                }
            }
        }
        Ok(())
    });
    write_json(&ctx.path(MANIFEST_FILE), &manifest)?;
    result.map(|()| manifest)
}

fn cached_record(ctx: &Ctx, stage: Stage, stamp: &str) -> Option<StageRecord> {
    let f: StampFile = read_json(&ctx.path(a::STAMP_DIR).join(format!("{stage}.json"))).ok()?;
    let complete = outputs(stage).iter().all(|o| ctx.path(o).exists());
    (f.stamp == stamp && complete).then_some(f.record)
}

/// Hash of what a stage depends on: the upstream stamp, the parameters it
/// reads and the contents of its input files.
fn stamp(ctx: &Ctx, stage: Stage, upstream: &str) -> Result<String, PipelineError> {
    let c = ctx.cfg;
    let params = match stage {
        Stage::Tessellate => json!({
            "frame": c.frame,
            "study_area": c.study_area,
            "hex_side": c.hex_side,
            "gtfs": digest_path(&c.paths.gtfs)?,
            "opportunities": digest_opt(c.paths.opportunities.as_deref())?,
        }),
        Stage::Estimate => json!({
            "gtfs": digest_path(&c.paths.gtfs)?,
            "observations": digest_opt(c.paths.observations.as_deref())?,
            "hub_tolerance": c.hub_tolerance,
            "feeder_max_radius": c.feeder_max_radius,
            "slot_length": c.slot_length,
            "estimation": c.estimation(),
        }),
        Stage::Synthesize => json!({
            "gtfs": digest_path(&c.paths.gtfs)?,
            "system_type": c.system_type,
            "rng_seed": c.rng_seed,
            "day_window": c.day_window,
            "wait_floor": c.wait_floor,
            "departures": c.departures()?,
        }),
        Stage::Route => json!({
            "walk": c.walk,
            "walk_overrides": digest_opt(c.paths.walk_overrides.as_deref())?,
            "weekday": c.weekday,
            "departures": c.departures()?,
        }),
        Stage::Score => json!({ "tau": c.tau.to_string(), "score_mode": c.score_mode }),
        Stage::Compare => json!({ "relative_gain_threshold": c.relative_gain_threshold }),
    };
    let mut h = Sha256::new();
    h.update(stage.name().as_bytes());
    h.update(upstream.as_bytes());
    h.update(params.to_string().as_bytes());
    Ok(hex::encode(h.finalize()))
}

fn digest_opt(p: Option<&Path>) -> Result<Option<String>, PipelineError> {
    p.map(digest_path).transpose()
}

/// Content hash of a file, or of every file directly inside a directory.
fn digest_path(p: &Path) -> Result<String, PipelineError> {
    let mut h = Sha256::new();
    if p.is_dir() {
        let mut names: Vec<PathBuf> = fs::read_dir(p)
            .map_err(|e| io_err(p, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        names.sort();
        for f in names {
            h.update(f.file_name().unwrap_or_default().as_encoded_bytes());
            h.update(Sha256::digest(fs::read(&f).map_err(|e| io_err(&f, e))?));
        }
    } else {
        h.update(fs::read(p).map_err(|e| io_err(p, e))?);
    }
    Ok(hex::encode(h.finalize()))
}

fn execute(ctx: &Ctx, stage: Stage, rec: &mut StageRecord) -> Result<(), PipelineError> {
    match stage {
        Stage::Tessellate => run_tessellate(ctx, rec),
        Stage::Estimate => run_estimate(ctx, rec),
        Stage::Synthesize => run_synthesize(ctx, rec),
        Stage::Route => run_route(ctx, rec),
        Stage::Score => run_score(ctx, rec),
        Stage::Compare => run_compare(ctx, rec),
    }
}

fn run_tessellate(ctx: &Ctx, rec: &mut StageRecord) -> Result<(), PipelineError> {
    let cfg = ctx.cfg;
    let feed = ctx.base_feed()?;
    let frame = cfg.frame.resolve(|| {
        let (lon, lat) = (feed.stops.iter().map(|s| s.stop_lon), feed.stops.iter().map(|s| s.stop_lat));
        Some((midrange(lon)?, midrange(lat)?))
    })?;
    let bounds = match cfg.study_area {
        Some([x0, y0, x1, y1]) => {
            let p = frame.to_plane(x0, y0);
            let q = frame.to_plane(x1, y1);
            BBox::new(p.x.min(q.x), p.y.min(q.y), p.x.max(q.x), p.y.max(q.y))
        }
        None => {
            let pts: Vec<Point> = feed.stops.iter().map(|s| frame.to_plane(s.stop_lon, s.stop_lat)).collect();
            if pts.is_empty() {
                return Err(PipelineError::Config("no study_area and the base feed has no stops".into()));
            }
            let pad = cfg.hex_side;
            let fold = |f: fn(f64, f64) -> f64, init: f64, g: fn(&Point) -> f64| pts.iter().map(g).fold(init, f);
            let b = BBox::new(
                fold(f64::min, f64::INFINITY, |p| p.x) - pad,
                fold(f64::min, f64::INFINITY, |p| p.y) - pad,
                fold(f64::max, f64::NEG_INFINITY, |p| p.x) + pad,
                fold(f64::max, f64::NEG_INFINITY, |p| p.y) + pad,
            );
            rec.warn(format!("no study_area given; using the stop extent padded by {pad} m"));
            b
        }
    };
    let mut grid = tessellate(bounds, cfg.hex_side)?;
    match &cfg.paths.opportunities {
        Some(path) => {
            let points = crate::geometry::read_opportunities(path, &frame)?;
            rec.count("opportunity_rows", points.len() as f64);
            let skipped = grid.assign_opportunities(points);
            if skipped > 0 {
                rec.warn(format!("{skipped} opportunity rows lie outside the study area"));
            }
        }
        None => {
            rec.warn("no opportunities file; every cell holds one opportunity".into());
            grid.set_opportunities(&vec![1.0; grid.len()]);
        }
    }
    rec.count("cells", grid.len() as f64);
    rec.count("opportunities", grid.total_opportunities());
    let art = GridArtifact::from_grid(frame, &grid);
    write_json(&ctx.path(a::GRID), &art)?;
    let geo = grid.to_geojson(&frame, |c| {
        let mut m = Map::new();
        m.insert("categories".into(), json!(c.categories));
        m
    });
    write_json(&ctx.path(a::GRID_GEOJSON), &geo)
}

fn run_estimate(ctx: &Ctx, rec: &mut StageRecord) -> Result<(), PipelineError> {
    let cfg = ctx.cfg;
    let (art, grid) = ctx.grid()?;
    let surface_dir = ctx.path(a::SURFACE_DIR);
    if surface_dir.exists() {
        fs::remove_dir_all(&surface_dir).map_err(|e| io_err(&surface_dir, e))?;
    }
    fs::create_dir_all(&surface_dir).map_err(|e| io_err(&surface_dir, e))?;
    let rejected_path = ctx.path(a::REJECTED_OBSERVATIONS);
    let mut rejected = csv::Writer::from_path(&rejected_path).map_err(|e| csv_err(&rejected_path, e))?;
    rejected.write_record(["line", "reason"]).map_err(|e| csv_err(&rejected_path, e))?;

    let Some(obs_path) = &cfg.paths.observations else {
        rec.warn("no observations configured; baseline-only run".into());
        rejected.flush().map_err(|e| io_err(&rejected_path, e))?;
        return write_json(&ctx.path(a::SURFACES), &SurfaceArtifact::default());
    };
    let feed = ctx.base_feed()?;
    let hubs: HashMap<String, Hub> = feed
        .stops
        .iter()
        .map(|s| (s.stop_id.clone(), Hub::new(s.stop_id.clone(), art.frame.to_plane(s.stop_lon, s.stop_lat))))
        .collect();
    let report = ingest(obs_path, &hubs, &art.frame, cfg.hub_tolerance)?;
    for r in &report.rejected {
        rejected
            .write_record([r.line.to_string(), r.reason.clone()])
            .map_err(|e| csv_err(&rejected_path, e))?;
    }
    rejected.flush().map_err(|e| io_err(&rejected_path, e))?;
    rec.count("observations", report.observations.len() as f64);
    rec.count("rejected_rows", report.rejected.len() as f64);
    if !report.rejected.is_empty() {
        rec.warn(format!("{} observation rows rejected, see {}", report.rejected.len(), a::REJECTED_OBSERVATIONS));
    }
    if report.observations.is_empty() {
        rec.warn("no usable observations; baseline-only run".into());
    }

    let hub_ids: BTreeSet<&str> = report.observations.iter().map(|o| o.hub_id.as_str()).collect();
    let areas: Vec<FeederArea> = hub_ids
        .iter()
        .map(|id| derive_feeder_area(&hubs[*id], &report.observations, &grid, cfg.feeder_max_radius))
        .collect();
    let centroids: BTreeMap<&str, Vec<(CellId, Point)>> = areas
        .iter()
        .map(|fa| {
            let pts = fa
                .centroids
                .iter()
                .map(|&id| (id, grid.cell(id).expect("feeder cell in grid").center))
                .collect();
            (fa.hub_id.as_str(), pts)
        })
        .collect();
    for fa in &areas {
        if fa.centroids.is_empty() {
            rec.warn(format!("hub {} has an empty feeder area", fa.hub_id));
        }
    }

    let datasets = bucket(&report.observations, cfg.slot_length)?;
    let params = cfg.estimation();
    let surfaces: Vec<EstimateSurface> = datasets
        .par_iter()
        .filter(|ds| !centroids[ds.hub_id.as_str()].is_empty())
        .map(|ds| estimate_surface(ds, &centroids[ds.hub_id.as_str()], &params))
        .collect::<Result<_, _>>()?;

    let (mut fallbacks, mut idw, mut clamped, mut unestimable) = (0usize, 0usize, 0usize, 0usize);
    for s in &surfaces {
        let label = format!("{}_{}_{}", s.hub_id, s.direction.as_str(), s.slot_start);
        for (field, d) in [("wait", &s.wait_diagnostics), ("in-vehicle", &s.travel_diagnostics)] {
            if let Some(f) = d.fallback {
                fallbacks += 1;
                rec.warn(format!("{label}: {field} field uses the dataset mean ({f:?})"));
            }
        }
        idw += s.estimates.values().filter(|e| e.flags.inverse_distance).count();
        clamped += s.estimates.values().filter(|e| e.flags.clamped).count();
        unestimable += s.unestimable.len();
        let p = surface_dir.join(format!("{label}.csv"));
        write_surface_csv(s, create(&p)?)?;
        let p = surface_dir.join(format!("{label}_variogram.csv"));
        write_variogram_csv(s, create(&p)?)?;
    }
    if idw > 0 {
        rec.warn(format!("{idw} cell estimates fell back to inverse-distance weighting"));
    }
    if clamped > 0 {
        rec.warn(format!("{clamped} cell estimates were negative and clamped to zero"));
    }
    rec.count("hubs", areas.len() as f64);
    rec.count("feeder_cells", areas.iter().map(|f| f.centroids.len()).sum::<usize>() as f64);
    rec.count("surfaces", surfaces.len() as f64);
    rec.count("mean_fallback_fields", fallbacks as f64);
    rec.count("inverse_distance_cells", idw as f64);
    rec.count("clamped_cells", clamped as f64);
    rec.count("unestimable_cells", unestimable as f64);
    write_json(&ctx.path(a::SURFACES), &SurfaceArtifact { feeder_areas: areas, surfaces })
}

fn run_synthesize(ctx: &Ctx, rec: &mut StageRecord) -> Result<(), PipelineError> {
    let cfg = ctx.cfg;
    let (art, grid) = ctx.grid()?;
    let est: SurfaceArtifact = read_json(&ctx.path(a::SURFACES))?;
    let base = ctx.base_feed()?;
    let window = cfg.window()?;
    let departures = cfg.departures()?;

    let mut lines: Vec<VirtualLine> = Vec::new();
    let mut points = BTreeMap::new();
    let (mut skipped, mut floored, mut filled) = (0usize, 0usize, 0usize);
    for fa in &est.feeder_areas {
        for dir in Direction::ALL {
            let surfs: Vec<&EstimateSurface> =
                est.surfaces.iter().filter(|s| s.hub_id == fa.hub_id && s.direction == dir).collect();
            if surfs.is_empty() {
                continue;
            }
            for &c in &fa.centroids {
                let Some(profile) = SlotProfile::from_surfaces(c, surfs.iter().copied(), cfg.slot_length, cfg.wait_floor)?
                else {
                    skipped += 1;
                    continue;
                };
                floored += usize::from(profile.any_floored());
                filled += usize::from(profile.any_filled());
                let line = if cfg.system_type == 1 {
                    let anchor = anchor_for(cfg.rng_seed, &route_id(dir, c, &fa.hub_id));
                    synthesize_line(c, &fa.hub_id, dir, &profile, anchor, window)
                } else {
                    synthesize_type2_line(c, &fa.hub_id, dir, &departures, &profile)
                };
                if line.trips.is_empty() {
                    continue;
                }
                points.insert(c, grid.cell(c).expect("feeder cell in grid").center);
                lines.push(line);
            }
        }
    }
    if skipped > 0 {
        rec.warn(format!("{skipped} feeder centroids had no estimate in any slot and get no line"));
    }
    if floored > 0 {
        rec.warn(format!("{floored} lines hit the wait floor of {} s", cfg.wait_floor));
    }
    if filled > 0 {
        rec.warn(format!("{filled} lines borrow estimates from neighbouring slots"));
    }
    rec.count("lines", lines.len() as f64);
    rec.count("trips", lines.iter().map(|l| l.trips.len()).sum::<usize>() as f64);
    let merged = write_gtfs(&base, &lines, &points, &art.frame)?;
    let dir = ctx.path(a::GTFS_DIR);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    }
    gtfs::write_dir(&merged, &dir)?;
    Ok(())
}

fn run_route(ctx: &Ctx, rec: &mut StageRecord) -> Result<(), PipelineError> {
    let cfg = ctx.cfg;
    let (art, grid) = ctx.grid()?;
    let opts = GraphOptions {
        walk: cfg.walk,
        overrides: cfg.paths.walk_overrides.as_deref().map(WalkOverrides::read_csv).transpose()?,
        weekday: cfg.weekday,
    };
    let centroids: Vec<(CellId, Point)> = grid.centroids().collect();
    let departs = cfg.departures()?;
    for (label, feed, file) in [
        ("baseline", ctx.base_feed()?, a::MATRIX_BASELINE),
        ("sms", gtfs::read_dir(&ctx.path(a::GTFS_DIR))?, a::MATRIX_SMS),
    ] {
        let g = build_graph(&feed, &art.frame, &opts)?;
        if !g.rejected.is_empty() {
            rec.warn(format!("{label}: {} trips rejected, first {:?}", g.rejected.len(), g.rejected[0]));
        }
        rec.count(&format!("{label}_trips"), g.trips.len() as f64);
        rec.count(&format!("{label}_connections"), g.connections.len() as f64);
        let m = travel_time_matrix(&g, &centroids, &departs);
        let unreachable = m.data().iter().filter(|v| v.is_infinite()).count();
        rec.count(&format!("{label}_unreachable_pairs"), unreachable as f64);
        let path = ctx.path(file);
        m.write_to(BufWriter::new(create(&path)?)).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

fn read_matrix(path: &Path) -> Result<TravelTimeMatrix, PipelineError> {
    let f = fs::File::open(path).map_err(|e| io_err(path, e))?;
    Ok(TravelTimeMatrix::read_from(std::io::BufReader::new(f))?)
}

fn run_score(ctx: &Ctx, rec: &mut StageRecord) -> Result<(), PipelineError> {
    let cfg = ctx.cfg;
    let (_, grid) = ctx.grid()?;
    for (matrix, scores) in [(a::MATRIX_BASELINE, a::SCORES_BASELINE), (a::MATRIX_SMS, a::SCORES)] {
        let m = read_matrix(&ctx.path(matrix))?;
        let s = score_all(&m, &grid, cfg.tau, cfg.score_mode)?;
        rec.count(&format!("{scores}_rows"), s.len() as f64);
        write_scores_csv(&s, BufWriter::new(create(&ctx.path(scores))?))?;
    }
    Ok(())
}

fn run_compare(ctx: &Ctx, rec: &mut StageRecord) -> Result<(), PipelineError> {
    let (art, grid) = ctx.grid()?;
    let load = |name: &str| -> Result<BTreeMap<CellId, f64>, PipelineError> {
        let p = ctx.path(name);
        let f = fs::File::open(&p).map_err(|e| io_err(&p, e))?;
        Ok(daily_average(&read_scores_csv(f)?)?)
    };
    let records = compare(&load(a::SCORES_BASELINE)?, &load(a::SCORES)?)?;
    let summary = summarize(&records, ctx.cfg.relative_gain_threshold);
    rec.count("improved_cells", summary.improved_cells as f64);
    rec.count("newly_connected", summary.newly_connected as f64);
    rec.count("mean_absolute_gain", summary.mean_absolute_gain);
    write_improvement_csv(&records, BufWriter::new(create(&ctx.path(a::IMPROVEMENT))?))?;
    write_json(&ctx.path(a::IMPROVEMENT_GEOJSON), &improvement_geojson(&grid, &art.frame, &records))?;
    write_json(&ctx.path(a::SUMMARY), &summary)
}

fn midrange(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    lo.is_finite().then_some((lo + hi) / 2.0)
}

fn io_err(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path, e: csv::Error) -> PipelineError {
    PipelineError::Artifact { path: path.to_path_buf(), reason: e.to_string() }
}

fn create(path: &Path) -> Result<fs::File, PipelineError> {
    fs::File::create(path).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| PipelineError::Json { path: path.into(), source: e })?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| PipelineError::Json { path: path.into(), source: e })
}
