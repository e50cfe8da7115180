use std::io::{Read, Write};

use rayon::prelude::*;

use super::graph::TimeExpandedGraph;
use super::query::{scan, Targets};
use super::RouterError;
use crate::geometry::{CellId, Point};

const MAGIC: &[u8; 4] = b"TTM1";

/// Door-to-door travel times `T(u, u', t)` between centroids, seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelTimeMatrix {
    pub cells: Vec<CellId>,
    pub departs: Vec<u32>,
    /// Indexed `[depart][origin][destination]`.
    data: Vec<f64>,
}

impl TravelTimeMatrix {
    pub fn new(cells: Vec<CellId>, departs: Vec<u32>, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), cells.len() * cells.len() * departs.len());
        Self { cells, departs, data }
    }

    pub fn n(&self) -> usize {
        self.cells.len()
    }

    pub fn get(&self, depart_idx: usize, origin: usize, dest: usize) -> f64 {
        let n = self.n();
        self.data[(depart_idx * n + origin) * n + dest]
    }

    /// Row of travel times from `origin` at the given departure.
    pub fn row(&self, depart_idx: usize, origin: usize) -> &[f64] {
        let n = self.n();
        let start = (depart_idx * n + origin) * n;
        &self.data[start..start + n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Little-endian layout: magic, cell count, departure count, cell ids,
    /// departure times, then the f64 values.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.cells.len() as u32).to_le_bytes())?;
        w.write_all(&(self.departs.len() as u32).to_le_bytes())?;
        for c in &self.cells {
            w.write_all(&c.0.to_le_bytes())?;
        }
        for d in &self.departs {
            w.write_all(&d.to_le_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, RouterError> {
        let bad = |m: &str| RouterError::Matrix(m.to_string());
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| RouterError::Matrix(e.to_string()))?;
        if buf.len() < 12 || &buf[..4] != MAGIC {
            return Err(bad("not a travel-time matrix"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().expect("4 bytes"));
        let n = u32_at(4) as usize;
        let d = u32_at(8) as usize;
        let values = n
            .checked_mul(n)
            .and_then(|v| v.checked_mul(d))
            .ok_or_else(|| bad("size overflow"))?;
        let expected = 12 + 4 * (n + d) + 8 * values;
        if buf.len() != expected {
            return Err(bad("truncated or oversized matrix"));
        }
        let cells = (0..n).map(|i| CellId(u32_at(12 + 4 * i))).collect();
        let departs = (0..d).map(|i| u32_at(12 + 4 * (n + i))).collect();
        let base = 12 + 4 * (n + d);
        let data = (0..values)
            .map(|i| f64::from_le_bytes(buf[base + 8 * i..base + 8 * i + 8].try_into().expect("8 bytes")))
            .collect();
        Ok(Self { cells, departs, data })
    }
}

/// Computes `T(u, u', t) = earliest arrival at u' − t` for every pair of
/// centroids and departure time, with zero on the diagonal. Runs on the
/// current rayon pool.
pub fn travel_time_matrix(g: &TimeExpandedGraph, centroids: &[(CellId, Point)], departs: &[u32]) -> TravelTimeMatrix {
    let points: Vec<Point> = centroids.iter().map(|(_, p)| *p).collect();
    let targets = Targets::new(g, &points);
    let n = points.len();
    let rows: Vec<Vec<f64>> = (0..departs.len() * n)
        .into_par_iter()
        .map(|k| {
            let (d, o) = (k / n, k % n);
            let t = f64::from(departs[d]);
            let s = scan(g, points[o], t);
            let mut row: Vec<f64> = targets.arrivals(g, points[o], &s).into_iter().map(|a| a - t).collect();
            row[o] = 0.0;
            row
        })
        .collect();
    TravelTimeMatrix::new(
        centroids.iter().map(|(c, _)| *c).collect(),
        departs.to_vec(),
        rows.into_iter().flatten().collect(),
    )
}
