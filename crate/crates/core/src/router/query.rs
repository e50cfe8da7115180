use super::graph::TimeExpandedGraph;
use crate::geometry::Point;

/// Labels of one scan from an origin point.
#[derive(Debug, Clone)]
pub struct ScanResult {
    pub depart: f64,
    /// Earliest time a vehicle drops the traveller at each stop.
    pub arrived: Vec<f64>,
    /// Earliest time the traveller can stand at each stop, by walking from
    /// the origin or transferring.
    pub ready: Vec<f64>,
}

/// Precomputed egress legs: for each target, the stops within walking reach.
#[derive(Debug, Clone)]
pub struct Targets {
    pub points: Vec<Point>,
    egress: Vec<Vec<(u32, f64)>>,
}

impl Targets {
    pub fn new(g: &TimeExpandedGraph, points: &[Point]) -> Self {
        Self {
            points: points.to_vec(),
            egress: points.iter().map(|&p| g.stops_near(p)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Arrival at every target: the better of walking directly and riding to
    /// a stop within reach of the target.
    pub fn arrivals(&self, g: &TimeExpandedGraph, origin: Point, scan: &ScanResult) -> Vec<f64> {
        self.points
            .iter()
            .zip(&self.egress)
            .map(|(&p, egress)| {
                let direct = g.walk.leg(origin, p).map_or(f64::INFINITY, |w| scan.depart + w);
                egress
                    .iter()
                    .map(|&(s, w)| scan.arrived[s as usize] + w)
                    .fold(direct, f64::min)
            })
            .collect()
    }
}

/// Earliest-arrival connection scan from `origin` leaving at `depart`.
///
/// Connections are visited in departure order. A connection is usable if its
/// trip was boarded at or before it or its departure stop is ready in time. Groups
/// sharing a departure time are repeated until nothing changes, so
/// zero-duration rides and same-second transfers are handled.
pub fn scan(g: &TimeExpandedGraph, origin: Point, depart: f64) -> ScanResult {
    let n = g.stops.len();
    let mut ready = vec![f64::INFINITY; n];
    let mut arrived = vec![f64::INFINITY; n];
    // Earliest boarded node per trip; riding starts there.
    let mut boarded = vec![u32::MAX; g.trips.len()];
    for (s, w) in g.stops_near(origin) {
        ready[s as usize] = depart + w;
    }

    let conns = &g.connections;
    let mut i = conns.partition_point(|c| f64::from(c.departure) < depart);
    while i < conns.len() {
        let t = conns[i].departure;
        let mut j = i;
        while j < conns.len() && conns[j].departure == t {
            j += 1;
        }
        loop {
            let mut changed = false;
            for c in &conns[i..j] {
                let trip = c.trip as usize;
                if c.from_node < boarded[trip] {
                    if ready[c.from_stop as usize] > f64::from(c.departure) {
                        continue;
                    }
                    boarded[trip] = c.from_node;
                    changed = true;
                }
                let a = f64::from(c.arrival);
                if a < arrived[c.to_stop as usize] {
                    arrived[c.to_stop as usize] = a;
                    for fp in &g.footpaths[c.to_stop as usize] {
                        let r = a + fp.seconds;
                        if r < ready[fp.to as usize] {
                            ready[fp.to as usize] = r;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        i = j;
    }
    ScanResult { depart, arrived, ready }
}

/// Earliest arrival at each target when leaving `origin` at `depart`;
/// unreachable targets get infinity.
pub fn earliest_arrival(g: &TimeExpandedGraph, origin: Point, depart: f64, targets: &[Point]) -> Vec<f64> {
    let t = Targets::new(g, targets);
    t.arrivals(g, origin, &scan(g, origin, depart))
}
