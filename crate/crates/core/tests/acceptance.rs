//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::fixtures;
use common::kriging_oracle;
use common::router_oracle::{random_timetable, Walk};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sms_access_core::accessibility::{score, ScoreMode};
use sms_access_core::geometry::{CellId, Frame, HexGrid, LocalProjection, Point};
use sms_access_core::geostat::{experimental_variogram, krige, SolveMethod, VariogramModel};
use sms_access_core::gtfs;
use sms_access_core::pipeline::{self, artifacts, demo, SurfaceArtifact, MANIFEST_FILE};
use sms_access_core::router::{build_graph, earliest_arrival, travel_time_matrix, GraphOptions, TravelTimeMatrix, WalkModel};
use sms_access_core::schedule::{anchor_for, departures, read_virtual_lines, write_gtfs, DayWindow, SlotProfile};

/// Weights, estimate and variance agree with the dense oracle to this
/// tolerance, scaled by the oracle's magnitude when above one.
const KRIGING_TOL: f64 = 1e-8;
const WEIGHT_SUM_TOL: f64 = 1e-9;
const KRIGING_BUDGET: Duration = Duration::from_secs(5);
const EXACT_TOL: f64 = 1e-6;
const RAMP_MAX_ERROR: f64 = 60.0;
const DEMO_BUDGET: Duration = Duration::from_secs(60);

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn random_samples(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<(Point, f64)> {
    loop {
        let s: Vec<_> = (0..n)
            .map(|_| (Point::new(rng.gen_range(0.0..extent), rng.gen_range(0.0..extent)), rng.gen_range(30.0..1200.0)))
            .collect();
        // Keep samples apart so none are merged as duplicates.
        let apart = s.iter().enumerate().all(|(i, a)| {
            s[i + 1..].iter().all(|b| ((a.0.x - b.0.x).powi(2) + (a.0.y - b.0.y).powi(2)).sqrt() > 5.0)
        });
        if apart {
            return s;
        }
    }
}

fn kriging_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let started = Instant::now();
    let mut worst_sum: f64 = 0.0;
    for case in 0..200 {
        let n = rng.gen_range(1..=10);
        let samples = random_samples(&mut rng, n, 2000.0);
        let sill = rng.gen_range(50.0..50_000.0);
        let range = rng.gen_range(3000.0..6000.0);
        let nugget = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..sill / 4.0) };
        let model = VariogramModel::bounded_linear(sill, range, nugget).map_err(|e| e.to_string())?;
        let q = Point::new(rng.gen_range(0.0..2000.0), rng.gen_range(0.0..2000.0));
        let sys = krige(q, &samples, &model).map_err(|e| format!("case {case}: {e}"))?;
        check(sys.method == SolveMethod::OrdinaryKriging && sys.samples == samples, || {
            format!("case {case}: solver changed the sample set or fell back")
        })?;
        let r = kriging_oracle::ordinary_kriging(q, &samples, sill, range, nugget);
        for (i, (a, b)) in sys.weights.iter().zip(&r.weights).enumerate() {
            check(close(*a, *b, KRIGING_TOL), || format!("case {case}: weight {i} {a} vs {b}"))?;
        }
        check(close(sys.estimate, r.estimate, KRIGING_TOL), || {
            format!("case {case}: estimate {} vs {}", sys.estimate, r.estimate)
        })?;
        check(close(sys.kriging_variance, r.variance, KRIGING_TOL), || {
            format!("case {case}: variance {} vs {}", sys.kriging_variance, r.variance)
        })?;
        let sum_err = (sys.weights.iter().sum::<f64>() - 1.0).abs();
        worst_sum = worst_sum.max(sum_err);
        check(sum_err <= WEIGHT_SUM_TOL, || format!("case {case}: weights sum off by {sum_err}"))?;
    }
    let elapsed = started.elapsed();
    check(elapsed < KRIGING_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("200 cases in {:.3}s, worst |Σλ−1| = {worst_sum:.1e}", elapsed.as_secs_f64()))
}

fn exact_interpolation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = rng.gen_range(1..=10);
        let samples = random_samples(&mut rng, n, 2500.0);
        let model = VariogramModel::bounded_linear(rng.gen_range(50.0..50_000.0), 3000.0, 0.0).map_err(|e| e.to_string())?;
        let k = rng.gen_range(0..n);
        let sys = krige(samples[k].0, &samples, &model).map_err(|e| format!("case {case}: {e}"))?;
        let err = (sys.estimate - samples[k].1).abs();
        worst = worst.max(err);
        check(err <= EXACT_TOL, || format!("case {case}: off by {err}"))?;
    }
    Ok(format!("100 cases, worst error {worst:.1e} s"))
}

fn variogram_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut bins = 0;
    for case in 0..20 {
        let samples: Vec<_> = (0..50)
            .map(|_| (Point::new(rng.gen_range(0.0..5000.0), rng.gen_range(0.0..5000.0)), rng.gen_range(30.0..1200.0)))
            .collect();
        let lag = [50.0, 100.0, 250.0][case % 3];
        let max_lag = [6000.0, 8000.0, 2000.0][case % 3];
        let ev = experimental_variogram(&samples, lag, max_lag).map_err(|e| e.to_string())?;
        let got: Vec<_> = ev.bins.iter().map(|b| (b.lag, b.mean_semivariance, b.pair_count)).collect();
        let expected = kriging_oracle::variogram_bins(&samples, lag, max_lag);
        check(got == expected, || format!("case {case}: bins differ"))?;
        bins += got.len();
    }
    Ok(format!("20 sets of 50 samples, {bins} bins equal bit for bit"))
}

fn headway_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut total = 0;
    for case in 0..100 {
        let slot_length = [900, 1800, 3600, 7200][case % 4];
        let n = (86_400 / slot_length) as usize;
        let slots = common::random_slots(&mut rng, n);
        let surfaces: Vec<_> = slots
            .iter()
            .enumerate()
            .map(|(i, v)| fixtures::surface(i, slot_length, CellId(7), *v))
            .collect();
        let profile = SlotProfile::from_surfaces(CellId(7), &surfaces, slot_length, 30)
            .map_err(|e| e.to_string())?
            .ok_or("no profile")?;
        let waits: Vec<u32> = slots.iter().map(|(w, _)| common::round_quarter(*w).max(30)).collect();
        let window = if case % 2 == 0 { DayWindow::FULL_DAY } else { DayWindow::default() };
        let anchor = anchor_for(rng.gen(), &format!("VL_access_{case}_H"));
        let got = departures(&profile, anchor, window);
        let expected = common::step_simulation(&waits, slot_length, anchor, window.start, window.end);
        check(got == expected, || format!("case {case}: departures differ from step simulation"))?;
        total += got.len();
    }
    Ok(format!("100 instances, {total} departures equal to the 1 s simulation"))
}

fn router_oracle() -> Outcome {
    const WALK: Walk = Walk { speed: 1.25, detour: 1.3, max_walk: 900.0 };
    let opts = GraphOptions { walk: WalkModel { speed: WALK.speed, detour: WALK.detour, max_walk: WALK.max_walk }, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut queries, mut skipped) = (0, 0);
    while queries < 200 {
        let tt = random_timetable(&mut rng, 20, 30, 4000.0);
        let g = build_graph(&tt.to_bundle(), &Frame::Planar, &opts).map_err(|e| e.to_string())?;
        for _ in 0..4 {
            let origin = if rng.gen_bool(0.3) {
                tt.stops[rng.gen_range(0..tt.stops.len())]
            } else {
                (rng.gen_range(0.0..4000.0), rng.gen_range(0.0..4000.0))
            };
            let depart = f64::from(rng.gen_range(0..3600u32));
            let mut targets = tt.stops.clone();
            targets.extend((0..5).map(|_| (rng.gen_range(0.0..4000.0), rng.gen_range(0.0..4000.0))));
            let four = tt.best_arrivals(WALK, origin, depart, &targets, 4);
            if four != tt.best_arrivals(WALK, origin, depart, &targets, 30) {
                // Itineraries with more than four legs would beat the enumeration.
                skipped += 1;
                continue;
            }
            let pts: Vec<Point> = targets.iter().map(|p| Point::new(p.0, p.1)).collect();
            let got = earliest_arrival(&g, Point::new(origin.0, origin.1), depart, &pts);
            check(got == four, || format!("query {queries}: {got:?} vs {four:?}"))?;
            queries += 1;
        }
    }
    Ok(format!("200 queries exact, {skipped} skipped for needing more than four legs"))
}

/// Random timetable whose stops sit near centroids of the grid, plus a
/// superset of it with extra trips.
fn grid_feeds(rng: &mut ChaCha8Rng, grid: &HexGrid) -> (TravelTimeMatrix, TravelTimeMatrix) {
    let mut base = random_timetable(rng, 40, 30, 1.0);
    let centres: Vec<Point> = grid.centroids().map(|(_, p)| p).collect();
    for s in &mut base.stops {
        let c = centres[rng.gen_range(0..centres.len())];
        *s = (c.x + rng.gen_range(-300.0..300.0), c.y + rng.gen_range(-300.0..300.0));
    }
    let mut merged = base.clone();
    let extra = random_timetable(rng, base.stops.len(), 30, 1.0);
    merged.trips.extend(extra.trips.into_iter().filter_map(|t| {
        let t: Vec<_> = t.into_iter().map(|(s, a, d)| (s % base.stops.len(), a, d)).collect();
        let mut ids: Vec<_> = t.iter().map(|x| x.0).collect();
        ids.sort_unstable();
        ids.dedup();
        (ids.len() == t.len()).then_some(t)
    }));
    let opts = GraphOptions::default();
    let centroids: Vec<_> = grid.centroids().collect();
    let departs: Vec<u32> = vec![0, 900, 1800, 2700];
    let m = |tt: &common::router_oracle::Timetable| {
        let g = build_graph(&tt.to_bundle(), &Frame::Planar, &opts).unwrap();
        travel_time_matrix(&g, &centroids, &departs)
    };
    (m(&base), m(&merged))
}

fn accessibility_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut grid = demo::grid();
    check(grid.len() == 100, || format!("grid has {} cells", grid.len()))?;
    let counts: Vec<f64> = (0..grid.len()).map(|_| f64::from(rng.gen_range(0..1000u32))).collect();
    grid.set_opportunities(&counts);
    let (base, merged) = grid_feeds(&mut rng, &grid);
    let taus = [0.0, 600.0, 1800.0, 3600.0, f64::INFINITY];
    let mut scaled = grid.clone();
    scaled.scale_opportunities(7.0);
    let (mut comparisons, mut strict) = (0, 0);
    for d in 0..base.departs.len() {
        for mode in [ScoreMode::Sociality, ScoreMode::Diversity] {
            let mut prev: Option<Vec<f64>> = None;
            for &tau in &taus {
                let b = score(&base, &grid, tau, d, mode).map_err(|e| e.to_string())?;
                let m = score(&merged, &grid, tau, d, mode).map_err(|e| e.to_string())?;
                let bv: Vec<f64> = b.iter().map(|s| s.reachable_opportunities).collect();
                for (x, y) in bv.iter().zip(&m) {
                    check(y.reachable_opportunities >= *x, || format!("dominance broken at tau {tau}"))?;
                    strict += usize::from(y.reachable_opportunities > *x);
                }
                if let Some(p) = &prev {
                    check(p.iter().zip(&bv).all(|(a, b)| a <= b), || format!("not monotone up to tau {tau}"))?;
                }
                if mode == ScoreMode::Sociality {
                    let s = score(&base, &scaled, tau, d, mode).map_err(|e| e.to_string())?;
                    for (x, y) in bv.iter().zip(&s) {
                        check(y.reachable_opportunities == 7.0 * x, || format!("scaling broken at tau {tau}"))?;
                    }
                }
                comparisons += bv.len();
                prev = Some(bv);
            }
        }
    }
    check(strict > 0, || "extra trips never improved a score".into())?;
    Ok(format!("{comparisons} centroid scores checked ({strict} strictly improved by extra trips)"))
}

fn snapshot(out: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            let rel = p.strip_prefix(root).unwrap().to_path_buf();
            if rel.starts_with(artifacts::STAMP_DIR) || rel == Path::new(MANIFEST_FILE) {
                continue;
            }
            if p.is_dir() {
                walk(root, &p, acc);
            } else {
                acc.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(out, out, &mut acc);
    acc
}

fn end_to_end() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let seed = 2024;
    let first = demo::write_demo(&tmp.path().join("first"), seed).map_err(|e| e.to_string())?;
    let started = Instant::now();
    pipeline::run(&first.config, pipeline::Stage::Compare, false).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    check(elapsed < DEMO_BUDGET, || format!("pipeline took {elapsed:?}"))?;

    let out = &first.config.paths.out;
    let est: SurfaceArtifact = serde_json::from_slice(&fs::read(out.join(artifacts::SURFACES)).unwrap()).unwrap();
    let feeder: Vec<CellId> = est.feeder_areas.iter().flat_map(|f| f.centroids.iter().copied()).collect();
    check(!feeder.is_empty(), || "empty feeder area".into())?;
    let mut r = csv::Reader::from_path(out.join(artifacts::IMPROVEMENT)).map_err(|e| e.to_string())?;
    let mut inside = 0;
    for row in r.records() {
        let row = row.map_err(|e| e.to_string())?;
        let id = CellId(row[0].parse().unwrap());
        let gain: f64 = row[3].parse().unwrap();
        if feeder.contains(&id) {
            check(gain > 0.0, || format!("cell {id} in the feeder area gains {gain}"))?;
            inside += 1;
        } else {
            check(gain == 0.0, || format!("cell {id} outside the feeder area gains {gain}"))?;
        }
    }

    let second = demo::write_demo(&tmp.path().join("second"), seed).map_err(|e| e.to_string())?;
    pipeline::run(&second.config, pipeline::Stage::Compare, false).map_err(|e| e.to_string())?;
    let (a, b) = (snapshot(out), snapshot(&second.config.paths.out));
    check(a == b, || "rerun with the same seed differs".into())?;
    Ok(format!(
        "{:.2}s, {inside} feeder cells improved, all others unchanged, {} output files identical on rerun",
        elapsed.as_secs_f64(),
        a.len()
    ))
}

fn ramp_recovery() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let (err, checked) = fixtures::ramp_worst_error(seed);
        check(checked > 0, || format!("seed {seed}: no centroid with three samples"))?;
        check(err <= RAMP_MAX_ERROR, || format!("seed {seed}: error {err:.1} s"))?;
        worst = worst.max(err);
    }
    Ok(format!("10 seeds, worst error {worst:.1} s"))
}

fn gtfs_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let frame = Frame::Geographic(LocalProjection::new(2.17, 48.71));
    let mut trips = 0;
    for case in 0..50 {
        let (lines, centroids) = fixtures::random_lines(&mut rng, &["HUB_1", "S2"]);
        let merged = write_gtfs(&fixtures::base_feed(), &lines, &centroids, &frame).map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        gtfs::write_dir(&merged, dir.path()).map_err(|e| e.to_string())?;
        let back = gtfs::read_dir(dir.path()).map_err(|e| e.to_string())?;
        check(back.trips == merged.trips && back.stop_times == merged.stop_times, || format!("case {case}: tables differ"))?;
        check(read_virtual_lines(&back).map_err(|e| e.to_string())? == lines, || format!("case {case}: lines differ"))?;
        trips += back.trips.len();
    }
    Ok(format!("50 line sets, {trips} trips reproduced exactly"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("kriging oracle equivalence", kriging_oracle),
        ("exact interpolation", exact_interpolation),
        ("semivariogram oracle", variogram_oracle),
        ("headway law", headway_law),
        ("router oracle", router_oracle),
        ("accessibility properties", accessibility_properties),
        ("end-to-end synthetic scenario", end_to_end),
        ("kriging field recovery", ramp_recovery),
        ("GTFS round trip", gtfs_round_trip),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
