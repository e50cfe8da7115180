//! Brute-force routing over small random timetables.

use rand::Rng;
use sms_access_core::gtfs::{GtfsBundle, Stop, StopTime, Trip};

#[derive(Debug, Clone)]
pub struct Timetable {
    pub stops: Vec<(f64, f64)>,
    /// Per trip: `(stop, arrival, departure)` in sequence order.
    pub trips: Vec<Vec<(usize, u32, u32)>>,
}

#[derive(Debug, Clone, Copy)]
pub struct Walk {
    pub speed: f64,
    pub detour: f64,
    pub max_walk: f64,
}

impl Walk {
    pub fn seconds(&self, a: (f64, f64), b: (f64, f64)) -> Option<f64> {
        let (dx, dy) = (a.0 - b.0, a.1 - b.1);
        let t = (dx * dx + dy * dy).sqrt() * self.detour / self.speed;
        (t <= self.max_walk).then_some(t)
    }
}

pub fn random_timetable<R: Rng>(rng: &mut R, max_stops: usize, max_trips: usize, extent: f64) -> Timetable {
    let n_stops = rng.gen_range(2..=max_stops);
    let stops = (0..n_stops)
        .map(|_| (rng.gen_range(0.0..extent), rng.gen_range(0.0..extent)))
        .collect();
    let n_trips = rng.gen_range(1..=max_trips);
    let trips = (0..n_trips)
        .map(|_| {
            let len = rng.gen_range(2..=n_stops.min(6));
            let mut t = rng.gen_range(0..3600u32);
            let mut used = Vec::new();
            let mut out = Vec::new();
            while out.len() < len {
                let s = rng.gen_range(0..n_stops);
                if used.contains(&s) {
                    continue;
                }
                used.push(s);
                let arr = t;
                let dep = arr + if rng.gen_bool(0.7) { 0 } else { rng.gen_range(0..60) };
                out.push((s, arr, dep));
                t = dep + if rng.gen_bool(0.1) { 0 } else { rng.gen_range(30..600) };
            }
            out
        })
        .collect();
    Timetable { stops, trips }
}

impl Timetable {
    pub fn stop_id(i: usize) -> String {
        format!("S{i:02}")
    }

    pub fn trip_id(i: usize) -> String {
        format!("T{i:02}")
    }

    pub fn to_bundle(&self) -> GtfsBundle {
        let mut b = GtfsBundle::default();
        for (i, &(x, y)) in self.stops.iter().enumerate() {
            b.stops.push(Stop { stop_id: Self::stop_id(i), stop_name: String::new(), stop_lat: y, stop_lon: x });
        }
        for (i, trip) in self.trips.iter().enumerate() {
            b.trips.push(Trip { route_id: format!("R{}", i % 4), service_id: "S".into(), trip_id: Self::trip_id(i) });
            for (k, &(s, a, d)) in trip.iter().enumerate() {
                b.stop_times.push(StopTime {
                    trip_id: Self::trip_id(i),
                    arrival_time: a,
                    departure_time: d,
                    stop_id: Self::stop_id(s),
                    stop_sequence: k as u32,
                });
            }
        }
        b
    }

    /// Best arrival at each target using at most `max_legs` vehicle legs.
    /// Round `k` rides every (trip, board, alight) triple whose boarding
    /// stop was ready after round `k − 1`.
    pub fn best_arrivals(&self, walk: Walk, origin: (f64, f64), depart: f64, targets: &[(f64, f64)], max_legs: usize) -> Vec<f64> {
        let n = self.stops.len();
        let mut ready: Vec<f64> = self
            .stops
            .iter()
            .map(|&s| walk.seconds(origin, s).map_or(f64::INFINITY, |w| depart + w))
            .collect();
        let mut best_vehicle = vec![f64::INFINITY; n];
        for _ in 0..max_legs {
            let mut arrived = vec![f64::INFINITY; n];
            for trip in &self.trips {
                for i in 0..trip.len() - 1 {
                    let (s, _, dep) = trip[i];
                    if ready[s] > f64::from(dep) {
                        continue;
                    }
                    for &(s2, arr, _) in &trip[i + 1..] {
                        arrived[s2] = arrived[s2].min(f64::from(arr));
                    }
                }
            }
            let mut next = ready.clone();
            for a in 0..n {
                if arrived[a].is_infinite() {
                    continue;
                }
                best_vehicle[a] = best_vehicle[a].min(arrived[a]);
                for b in 0..n {
                    let w = if a == b { Some(0.0) } else { walk.seconds(self.stops[a], self.stops[b]) };
                    if let Some(w) = w {
                        next[b] = next[b].min(arrived[a] + w);
                    }
                }
            }
            ready = next;
        }
        targets
            .iter()
            .map(|&p| {
                let direct = walk.seconds(origin, p).map_or(f64::INFINITY, |w| depart + w);
                (0..n)
                    .filter_map(|s| walk.seconds(self.stops[s], p).map(|w| best_vehicle[s] + w))
                    .fold(direct, f64::min)
            })
            .collect()
    }

    /// Every feasible change `(trip, index) → (trip', index')` reduced to the
    /// earliest boardable stoptime per (stop, trip'), with its walk time.
    pub fn transfer_arcs(&self, walk: Walk) -> Vec<((usize, usize), (usize, usize), f64)> {
        let mut out = Vec::new();
        for (ta, trip_a) in self.trips.iter().enumerate() {
            for (ia, &(sa, arr, _)) in trip_a.iter().enumerate().skip(1) {
                let mut best: std::collections::BTreeMap<(usize, usize), (u32, usize, f64)> = Default::default();
                for (tb, trip_b) in self.trips.iter().enumerate() {
                    if tb == ta {
                        continue;
                    }
                    for (ib, &(sb, _, dep)) in trip_b.iter().enumerate().take(trip_b.len() - 1) {
                        let w = if sa == sb { Some(0.0) } else { walk.seconds(self.stops[sa], self.stops[sb]) };
                        let Some(w) = w else { continue };
                        if f64::from(arr) + w > f64::from(dep) {
                            continue;
                        }
                        let e = best.entry((sb, tb)).or_insert((dep, ib, w));
                        if (dep, ib) < (e.0, e.1) {
                            *e = (dep, ib, w);
                        }
                    }
                }
                for ((_, tb), (_, ib, w)) in best {
                    out.push(((ta, ia), (tb, ib), w));
                }
            }
        }
        out.sort_by_key(|a| (a.0, a.1));
        out
    }
}
