//! Planar geometry, the hexagonal tessellation of the study area and
//! conversions between geographic input coordinates and the working plane.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

const EARTH_RADIUS_M: f64 = 6_371_008.8;
const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("degenerate bounds {0:?}: width and height must be positive and finite")]
    DegenerateBounds(BBox),
    #[error("hexagon side must be positive and finite, got {0}")]
    InvalidSide(f64),
    #[error("bounds {0:?} are too small to hold a single hexagon of side {1} m")]
    BoundsTooSmall(BBox, f64),
    #[error("point ({x}, {y}) lies outside the grid bounds")]
    OutsideBounds { x: f64, y: f64 },
    #[error("failed to read opportunities from {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

/// A point in the projected working plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn translate(self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

/// Euclidean distance in the plane.
pub fn distance(a: Point, b: Point) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

/// Axis-aligned box; containment is closed on every side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.min_x + self.max_x),
            0.5 * (self.min_y + self.max_y),
        )
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    fn is_degenerate(&self) -> bool {
        let finite = [self.min_x, self.min_y, self.max_x, self.max_y]
            .iter()
            .all(|v| v.is_finite());
        !finite || self.width() <= 0.0 || self.height() <= 0.0
    }
}

/// Local equirectangular projection around a reference point. At the scale of
/// a metropolitan study area its distortion is far below the cell size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalProjection {
    pub origin_lon: f64,
    pub origin_lat: f64,
}

impl LocalProjection {
    pub fn new(origin_lon: f64, origin_lat: f64) -> Self {
        Self {
            origin_lon,
            origin_lat,
        }
    }

    pub fn forward(&self, lon: f64, lat: f64) -> Point {
        let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        let cos0 = self.origin_lat.to_radians().cos();
        Point::new(
            k * (lon - self.origin_lon) * cos0,
            k * (lat - self.origin_lat),
        )
    }

    pub fn inverse(&self, p: Point) -> (f64, f64) {
        let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        let cos0 = self.origin_lat.to_radians().cos();
        (self.origin_lon + p.x / (k * cos0), self.origin_lat + p.y / k)
    }
}

/// How raw input coordinates map to the working plane.
///
/// `Planar` means inputs are already projected meters: the `lon` column holds
/// the easting and the `lat` column the northing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Frame {
    Planar,
    Geographic(LocalProjection),
}

impl Frame {
    pub fn to_plane(&self, lon: f64, lat: f64) -> Point {
        match self {
            Frame::Planar => Point::new(lon, lat),
            Frame::Geographic(proj) => proj.forward(lon, lat),
        }
    }

    /// Returns `(lon, lat)`, or `(x, y)` for a planar frame.
    pub fn to_input(&self, p: Point) -> (f64, f64) {
        match self {
            Frame::Planar => (p.x, p.y),
            Frame::Geographic(proj) => proj.inverse(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellId(pub u32);

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HexCell {
    pub id: CellId,
    pub center: Point,
    pub side: f64,
    pub opportunities: f64,
    /// Opportunity categories present in the cell, used by diversity scoring.
    pub categories: BTreeSet<String>,
    col: i32,
    row: i32,
}

impl HexCell {
    /// Vertices of the flat-top hexagon, counter-clockwise from the east vertex.
    pub fn vertices(&self) -> [Point; 6] {
        let c = self.center;
        let s = self.side;
        let h = 0.5 * SQRT3 * s;
        [
            c.translate(s, 0.0),
            c.translate(0.5 * s, h),
            c.translate(-0.5 * s, h),
            c.translate(-s, 0.0),
            c.translate(-0.5 * s, -h),
            c.translate(0.5 * s, -h),
        ]
    }

    /// Closed containment test with a tolerance relative to the side length.
    pub fn contains(&self, p: Point) -> bool {
        hexagon_contains(self.center, self.side, p)
    }

    pub fn lattice_index(&self) -> (i32, i32) {
        (self.col, self.row)
    }
}

fn hexagon_contains(center: Point, side: f64, p: Point) -> bool {
    let eps = 1e-9 * side;
    let dx = (p.x - center.x).abs();
    let dy = (p.y - center.y).abs();
    dy <= 0.5 * SQRT3 * side + eps && SQRT3 * dx + dy <= SQRT3 * side + eps
}

/// Flat-top hexagonal tessellation.
///
/// The lattice is anchored so that the first hexagon sits flush in the lower
/// left corner of the bounds: column `c` has its centers at
/// `x = min_x + side + 1.5·side·c`, and row `r` at
/// `y = min_y + h/2 + h·r` (odd columns shifted up by `h/2`), where `h = √3·side`.
/// Every lattice point inside the closed bounds becomes a cell; ids follow
/// row-major order over `(row, col)`.
#[derive(Debug, Clone)]
pub struct HexGrid {
    cells: Vec<HexCell>,
    side: f64,
    bounds: BBox,
    origin: Point,
    by_index: HashMap<(i32, i32), usize>,
}

impl HexGrid {
    pub fn cells(&self) -> &[HexCell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn bounds(&self) -> BBox {
        self.bounds
    }

    pub fn cell(&self, id: CellId) -> Option<&HexCell> {
        self.cells.get(id.0 as usize)
    }

    pub fn centroids(&self) -> impl Iterator<Item = (CellId, Point)> + '_ {
        self.cells.iter().map(|c| (c.id, c.center))
    }

    pub fn total_opportunities(&self) -> f64 {
        self.cells.iter().map(|c| c.opportunities).sum()
    }

    fn fractional_lattice(&self, p: Point) -> (i32, i32) {
        let dx = p.x - self.origin.x;
        let dy = p.y - self.origin.y;
        let q = (2.0 / 3.0) * dx / self.side;
        let r = (-dx / 3.0 + dy / SQRT3) / self.side;
        let (q, r) = cube_round(q, r);
        axial_to_offset(q, r)
    }

    /// The cell whose hexagon contains `p`; shared edges resolve to the
    /// lowest id. Points inside the bounds but outside every hexagon (near the
    /// border) map to the nearest center.
    pub fn locate(&self, p: Point) -> Result<&HexCell, GeometryError> {
        if !p.is_finite() || !self.bounds.contains(p) {
            return Err(GeometryError::OutsideBounds { x: p.x, y: p.y });
        }
        let (col, row) = self.fractional_lattice(p);
        let (q, r) = offset_to_axial(col, row);
        let mut best: Option<&HexCell> = None;
        for (dq, dr) in AXIAL_NEIGHBOURS_AND_SELF {
            let idx = axial_to_offset(q + dq, r + dr);
            if let Some(&i) = self.by_index.get(&idx) {
                let cell = &self.cells[i];
                if cell.contains(p) && best.is_none_or(|b| cell.id < b.id) {
                    best = Some(cell);
                }
            }
        }
        if let Some(cell) = best {
            return Ok(cell);
        }
        let nearest = self
            .cells
            .iter()
            .min_by(|a, b| {
                distance(a.center, p)
                    .total_cmp(&distance(b.center, p))
                    .then(a.id.cmp(&b.id))
            })
            .expect("grid is never empty");
        Ok(nearest)
    }

    /// Aggregates opportunity points into cells. Points outside the bounds are
    /// counted and skipped.
    pub fn assign_opportunities<I>(&mut self, points: I) -> usize
    where
        I: IntoIterator<Item = OpportunityPoint>,
    {
        let mut skipped = 0;
        for op in points {
            match self.locate(op.location) {
                Ok(cell) => {
                    let i = cell.id.0 as usize;
                    self.cells[i].opportunities += op.count;
                    self.cells[i].categories.extend(op.categories);
                }
                Err(_) => skipped += 1,
            }
        }
        skipped
    }

    /// Overwrites the opportunity counts, indexed by cell id.
    pub fn set_opportunities(&mut self, counts: &[f64]) {
        for (cell, &c) in self.cells.iter_mut().zip(counts) {
            cell.opportunities = c;
        }
    }

    pub fn scale_opportunities(&mut self, k: f64) {
        for cell in &mut self.cells {
            cell.opportunities *= k;
        }
    }

    /// GeoJSON polygons with `id` and `opportunities` properties, plus
    /// whatever `extra` adds per cell.
    pub fn to_geojson<F>(&self, frame: &Frame, mut extra: F) -> Value
    where
        F: FnMut(&HexCell) -> Map<String, Value>,
    {
        let features: Vec<Value> = self
            .cells
            .iter()
            .map(|cell| {
                let mut ring: Vec<Value> = cell
                    .vertices()
                    .iter()
                    .map(|v| {
                        let (a, b) = frame.to_input(*v);
                        json!([a, b])
                    })
                    .collect();
                ring.push(ring[0].clone());
                let mut props = Map::new();
                props.insert("id".into(), json!(cell.id.0));
                props.insert("opportunities".into(), json!(cell.opportunities));
                props.extend(extra(cell));
                json!({
                    "type": "Feature",
                    "geometry": {"type": "Polygon", "coordinates": [ring]},
                    "properties": props,
                })
            })
            .collect();
        json!({"type": "FeatureCollection", "features": features})
    }
}

const AXIAL_NEIGHBOURS_AND_SELF: [(i32, i32); 7] =
    [(0, 0), (1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];

fn cube_round(q: f64, r: f64) -> (i32, i32) {
    let s = -q - r;
    let (mut rq, mut rr, rs) = (q.round(), r.round(), s.round());
    let (dq, dr, ds) = ((rq - q).abs(), (rr - r).abs(), (rs - s).abs());
    if dq > dr && dq > ds {
        rq = -rr - rs;
    } else if dr > ds {
        rr = -rq - rs;
    }
    (rq as i32, rr as i32)
}

fn axial_to_offset(q: i32, r: i32) -> (i32, i32) {
    (q, r + (q - (q & 1)) / 2)
}

fn offset_to_axial(col: i32, row: i32) -> (i32, i32) {
    (col, row - (col - (col & 1)) / 2)
}

/// Builds the hexagonal grid covering `bounds`.
pub fn tessellate(bounds: BBox, side: f64) -> Result<HexGrid, GeometryError> {
    if !(side.is_finite() && side > 0.0) {
        return Err(GeometryError::InvalidSide(side));
    }
    if bounds.is_degenerate() {
        return Err(GeometryError::DegenerateBounds(bounds));
    }
    let h = SQRT3 * side;
    let origin = Point::new(bounds.min_x + side, bounds.min_y + 0.5 * h);
    let col_step = 1.5 * side;

    let max_col = ((bounds.max_x - origin.x) / col_step).floor() as i32 + 1;
    let max_row = ((bounds.max_y - origin.y) / h).floor() as i32 + 1;

    let mut found = Vec::new();
    for col in 0..=max_col.max(0) {
        let x = origin.x + col_step * f64::from(col);
        let shift = if col & 1 == 1 { 0.5 } else { 0.0 };
        for row in -1..=max_row.max(0) {
            let y = origin.y + h * (f64::from(row) + shift);
            let p = Point::new(x, y);
            if bounds.contains(p) {
                found.push((row, col, p));
            }
        }
    }
    if found.is_empty() {
        return Err(GeometryError::BoundsTooSmall(bounds, side));
    }
    found.sort_by_key(|a| (a.0, a.1));

    let mut cells = Vec::with_capacity(found.len());
    let mut by_index = HashMap::with_capacity(found.len());
    for (i, (row, col, center)) in found.into_iter().enumerate() {
        by_index.insert((col, row), i);
        cells.push(HexCell {
            id: CellId(i as u32),
            center,
            side,
            opportunities: 0.0,
            categories: BTreeSet::new(),
            col,
            row,
        });
    }
    Ok(HexGrid {
        cells,
        side,
        bounds,
        origin,
        by_index,
    })
}

/// One row of the opportunities CSV, already in the working plane.
#[derive(Debug, Clone, PartialEq)]
pub struct OpportunityPoint {
    pub location: Point,
    pub count: f64,
    pub categories: BTreeSet<String>,
}

#[derive(Debug, Deserialize)]
struct OpportunityRow {
    lon: f64,
    lat: f64,
    count: f64,
    #[serde(default)]
    categories: Option<String>,
}

/// Reads `lon,lat,count[,categories]` rows; categories are `;`-separated.
/// Rows with a negative or non-finite count are dropped.
pub fn read_opportunities(
    path: &Path,
    frame: &Frame,
) -> Result<Vec<OpportunityPoint>, GeometryError> {
    let wrap = |source| GeometryError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(wrap)?;
    let mut out = Vec::new();
    for row in reader.deserialize::<OpportunityRow>() {
        let row = row.map_err(wrap)?;
        if !(row.count.is_finite() && row.count >= 0.0) {
            log::warn!("skipping opportunity row with count {}", row.count);
            continue;
        }
        let categories = row
            .categories
            .unwrap_or_default()
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
            .collect();
        out.push(OpportunityPoint {
            location: frame.to_plane(row.lon, row.lat),
            count: row.count,
            categories,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distance_basics() {
        assert_eq!(distance(Point::new(0.0, 0.0), Point::new(0.0, 0.0)), 0.0);
        assert_eq!(distance(Point::new(0.0, 0.0), Point::new(3.0, 4.0)), 5.0);
    }

    #[test]
    fn distance_matches_formula_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let a = Point::new(rng.gen_range(-1e5..1e5), rng.gen_range(-1e5..1e5));
            let b = Point::new(rng.gen_range(-1e5..1e5), rng.gen_range(-1e5..1e5));
            let expected = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
            assert!((distance(a, b) - expected).abs() <= 1e-9 * expected.max(1.0));
            assert_eq!(distance(a, b), distance(b, a));
        }
    }

    #[test]
    fn single_hexagon_bounds_give_one_centered_cell() {
        let s = 750.0;
        let b = BBox::new(100.0, 200.0, 100.0 + 2.0 * s, 200.0 + SQRT3 * s);
        let grid = tessellate(b, s).unwrap();
        assert_eq!(grid.len(), 1);
        let c = grid.cells()[0].center;
        assert!(distance(c, b.center()) < 1e-9);
    }

    #[test]
    fn study_area_grid_uses_kilometre_hexagons() {
        // Table-1 side length over a ~20 km box.
        let grid = tessellate(BBox::new(0.0, 0.0, 20_000.0, 15_000.0), 1000.0).unwrap();
        assert!(grid.cells().iter().all(|c| c.side == 1000.0));
        assert!(grid.len() > 100);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(matches!(
            tessellate(BBox::new(0.0, 0.0, 0.0, 10.0), 1.0),
            Err(GeometryError::DegenerateBounds(_))
        ));
        assert!(matches!(
            tessellate(BBox::new(0.0, 0.0, 10.0, 10.0), 0.0),
            Err(GeometryError::InvalidSide(_))
        ));
        assert!(matches!(
            tessellate(BBox::new(0.0, 0.0, 10.0, 10.0), 100.0),
            Err(GeometryError::BoundsTooSmall(..))
        ));
    }

    /// Enumerates lattice points over a generous index range and keeps those
    /// inside the box.
    fn lattice_points_inside(b: BBox, s: f64) -> Vec<Point> {
        let h = SQRT3 * s;
        let mut out = Vec::new();
        for col in -50..200 {
            for row in -50..200 {
                let x = b.min_x + s + 1.5 * s * col as f64;
                let y = b.min_y + 0.5 * h + h * (row as f64 + if col % 2 != 0 { 0.5 } else { 0.0 });
                let p = Point::new(x, y);
                if b.contains(p) {
                    out.push(p);
                }
            }
        }
        out
    }

    #[test]
    fn cell_count_matches_brute_force_lattice() {
        let b = BBox::new(0.0, 0.0, 10_000.0, 10_000.0);
        let grid = tessellate(b, 1000.0).unwrap();
        let oracle = lattice_points_inside(b, 1000.0);
        assert_eq!(grid.len(), oracle.len());
        for p in oracle {
            assert!(grid.cells().iter().any(|c| distance(c.center, p) < 1e-6));
        }
    }

    #[test]
    fn ten_by_ten_layout() {
        let s = 1000.0;
        let b = BBox::new(0.0, 0.0, 15.5 * s, 9.75 * SQRT3 * s);
        let grid = tessellate(b, s).unwrap();
        assert_eq!(grid.len(), 100);
    }

    #[test]
    fn locate_center_returns_cell() {
        let grid = tessellate(BBox::new(0.0, 0.0, 8000.0, 8000.0), 1000.0).unwrap();
        for cell in grid.cells() {
            assert_eq!(grid.locate(cell.center).unwrap().id, cell.id);
        }
    }

    #[test]
    fn shared_edge_resolves_to_lowest_id() {
        let grid = tessellate(BBox::new(0.0, 0.0, 8000.0, 8000.0), 1000.0).unwrap();
        let mut checked = 0;
        for a in grid.cells() {
            for b in grid.cells() {
                if a.id >= b.id {
                    continue;
                }
                let d = distance(a.center, b.center);
                if (d - SQRT3 * 1000.0).abs() < 1e-6 {
                    let mid = Point::new(0.5 * (a.center.x + b.center.x), 0.5 * (a.center.y + b.center.y));
                    assert_eq!(grid.locate(mid).unwrap().id, a.id);
                    checked += 1;
                }
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn outside_bounds_is_not_found() {
        let grid = tessellate(BBox::new(0.0, 0.0, 8000.0, 8000.0), 1000.0).unwrap();
        assert!(grid.locate(Point::new(-1.0, 10.0)).is_err());
        assert!(grid.locate(Point::new(f64::NAN, 10.0)).is_err());
    }

    /// Point-in-polygon (ray casting) against every hexagon polygon.
    fn ray_cast(poly: &[Point], p: Point) -> bool {
        let mut inside = false;
        let n = poly.len();
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    #[test]
    fn locate_matches_polygon_containment_oracle() {
        let b = BBox::new(-3000.0, 500.0, 9000.0, 11000.0);
        let grid = tessellate(b, 1000.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p = Point::new(rng.gen_range(b.min_x..b.max_x), rng.gen_range(b.min_y..b.max_y));
            let containing: Vec<CellId> = grid
                .cells()
                .iter()
                .filter(|c| ray_cast(&c.vertices(), p))
                .map(|c| c.id)
                .collect();
            let got = grid.locate(p).unwrap();
            match containing.iter().min() {
                Some(id) => assert_eq!(got.id, *id),
                None => {
                    let best = grid
                        .cells()
                        .iter()
                        .map(|c| distance(c.center, p))
                        .fold(f64::INFINITY, f64::min);
                    assert_eq!(distance(got.center, p), best);
                }
            }
        }
    }

    #[test]
    fn projection_round_trips() {
        let proj = LocalProjection::new(2.17, 48.71);
        let p = proj.forward(2.25, 48.65);
        let (lon, lat) = proj.inverse(p);
        assert!((lon - 2.25).abs() < 1e-12 && (lat - 48.65).abs() < 1e-12);
        // One degree of latitude is ~111 km.
        let q = proj.forward(2.17, 49.71);
        assert!((q.y - 111_195.0).abs() < 5.0);
    }

    #[test]
    fn opportunities_aggregate_into_cells() {
        let mut grid = tessellate(BBox::new(0.0, 0.0, 5000.0, 5000.0), 1000.0).unwrap();
        let c0 = grid.cells()[0].center;
        let skipped = grid.assign_opportunities(vec![
            OpportunityPoint { location: c0, count: 10.0, categories: ["school".to_string()].into() },
            OpportunityPoint { location: c0.translate(10.0, 0.0), count: 5.0, categories: ["shop".to_string()].into() },
            OpportunityPoint { location: Point::new(-100.0, 0.0), count: 99.0, categories: BTreeSet::new() },
        ]);
        assert_eq!(skipped, 1);
        assert_eq!(grid.cells()[0].opportunities, 15.0);
        assert_eq!(grid.cells()[0].categories.len(), 2);
        assert_eq!(grid.total_opportunities(), 15.0);
    }

    #[test]
    fn geojson_has_closed_rings() {
        let grid = tessellate(BBox::new(0.0, 0.0, 3000.0, 3000.0), 1000.0).unwrap();
        let gj = grid.to_geojson(&Frame::Planar, |_| Map::new());
        let features = gj["features"].as_array().unwrap();
        assert_eq!(features.len(), grid.len());
        let ring = features[0]["geometry"]["coordinates"][0].as_array().unwrap();
        assert_eq!(ring.len(), 7);
        assert_eq!(ring[0], ring[6]);
        assert_eq!(features[0]["properties"]["id"], 0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn interior_points_are_within_circumradius(
                x in 0.0f64..1.0, y in 0.0f64..1.0, side in 200.0f64..1500.0
            ) {
                let b = BBox::new(0.0, 0.0, 12_000.0, 9_000.0);
                let grid = tessellate(b, side).unwrap();
                let p = Point::new(b.min_x + x * b.width(), b.min_y + y * b.height());
                let cell = grid.locate(p).unwrap();
                if grid.cells().iter().any(|c| c.contains(p)) {
                    prop_assert!(distance(p, cell.center) <= side * (1.0 + 1e-9));
                }
            }

            #[test]
            fn tessellation_is_deterministic(w in 2000.0f64..20_000.0, h in 2000.0f64..20_000.0) {
                let b = BBox::new(0.0, 0.0, w, h);
                let a = tessellate(b, 700.0).unwrap();
                let c = tessellate(b, 700.0).unwrap();
                prop_assert_eq!(a.cells(), c.cells());
                for cell in a.cells() {
                    prop_assert!(b.contains(cell.center));
                }
            }

            #[test]
            fn triangle_inequality(
                ax in -1e4f64..1e4, ay in -1e4f64..1e4,
                bx in -1e4f64..1e4, by in -1e4f64..1e4,
                cx in -1e4f64..1e4, cy in -1e4f64..1e4,
            ) {
                let (a, b, c) = (Point::new(ax, ay), Point::new(bx, by), Point::new(cx, cy));
                prop_assert!(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
            }
        }
    }
}
