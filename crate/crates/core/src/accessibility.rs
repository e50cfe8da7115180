//! Isochrone accessibility: opportunities reachable within a time budget.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::geometry::{CellId, Frame, HexGrid};
use crate::router::TravelTimeMatrix;

#[derive(Debug, thiserror::Error)]
pub enum AccessError {
    #[error("time budget must be nonnegative, got {0}")]
    InvalidTau(f64),
    #[error("matrix cell {0} is not in the grid")]
    UnknownCell(CellId),
    #[error("departure index {0} out of range")]
    NoSuchDeparture(usize),
    #[error("no departure samples to average")]
    NoSamples,
    #[error("centroid sets differ: {0:?}")]
    CentroidMismatch(Vec<CellId>),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What a reachable cell contributes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    /// Sum of opportunity counts.
    #[default]
    Sociality,
    /// Number of distinct opportunity categories.
    Diversity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessibilityScore {
    pub centroid_id: CellId,
    pub depart: u32,
    pub reachable_opportunities: f64,
    pub reachable_cells: usize,
}

struct Layer<'a> {
    opportunities: Vec<f64>,
    categories: Vec<&'a BTreeSet<String>>,
}

fn layer<'a>(m: &TravelTimeMatrix, grid: &'a HexGrid) -> Result<Layer<'a>, AccessError> {
    let mut opportunities = Vec::with_capacity(m.n());
    let mut categories = Vec::with_capacity(m.n());
    for id in &m.cells {
        let cell = grid.cell(*id).ok_or(AccessError::UnknownCell(*id))?;
        opportunities.push(cell.opportunities);
        categories.push(&cell.categories);
    }
    Ok(Layer { opportunities, categories })
}

fn check_tau(tau: f64) -> Result<(), AccessError> {
    if tau.is_nan() || tau < 0.0 {
        Err(AccessError::InvalidTau(tau))
    } else {
        Ok(())
    }
}

fn score_row(row: &[f64], origin: usize, layer: &Layer, tau: f64, mode: ScoreMode) -> (f64, usize) {
    let reachable = |j: usize| j == origin || row[j] <= tau;
    let cells = (0..row.len()).filter(|&j| reachable(j)).count();
    let value = match mode {
        ScoreMode::Sociality => (0..row.len())
            .filter(|&j| reachable(j))
            .map(|j| layer.opportunities[j])
            .sum(),
        ScoreMode::Diversity => {
            let union: BTreeSet<&String> = (0..row.len())
                .filter(|&j| reachable(j))
                .flat_map(|j| layer.categories[j].iter())
                .collect();
            union.len() as f64
        }
    };
    (value, cells)
}

/// Scores every centroid at one departure: cells with `T ≤ tau` count, and
/// the origin cell always does.
pub fn score(
    m: &TravelTimeMatrix,
    grid: &HexGrid,
    tau: f64,
    depart_idx: usize,
    mode: ScoreMode,
) -> Result<Vec<AccessibilityScore>, AccessError> {
    check_tau(tau)?;
    if depart_idx >= m.departs.len() {
        return Err(AccessError::NoSuchDeparture(depart_idx));
    }
    let layer = layer(m, grid)?;
    Ok((0..m.n())
        .into_par_iter()
        .map(|o| {
            let (value, cells) = score_row(m.row(depart_idx, o), o, &layer, tau, mode);
            AccessibilityScore {
                centroid_id: m.cells[o],
                depart: m.departs[depart_idx],
                reachable_opportunities: value,
                reachable_cells: cells,
            }
        })
        .collect())
}

/// Scores at every departure of the matrix, ordered by departure then centroid.
pub fn score_all(m: &TravelTimeMatrix, grid: &HexGrid, tau: f64, mode: ScoreMode) -> Result<Vec<AccessibilityScore>, AccessError> {
    let mut out = Vec::with_capacity(m.n() * m.departs.len());
    for d in 0..m.departs.len() {
        out.extend(score(m, grid, tau, d, mode)?);
    }
    Ok(out)
}

/// Mean score per centroid over all departure samples present.
pub fn daily_average(scores: &[AccessibilityScore]) -> Result<BTreeMap<CellId, f64>, AccessError> {
    if scores.is_empty() {
        return Err(AccessError::NoSamples);
    }
    let mut acc: BTreeMap<CellId, Vec<(u32, f64)>> = BTreeMap::new();
    for s in scores {
        acc.entry(s.centroid_id).or_default().push((s.depart, s.reachable_opportunities));
    }
    Ok(acc
        .into_iter()
        .map(|(id, mut v)| {
            v.sort_by_key(|a| a.0);
            let sum: f64 = v.iter().map(|x| x.1).sum();
            (id, sum / v.len() as f64)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRecord {
    pub centroid_id: CellId,
    pub baseline: f64,
    pub with_sms: f64,
    pub absolute_gain: f64,
    /// `absolute_gain / max(baseline, 1)`.
    pub relative_gain: f64,
    /// Nothing reachable before, something after.
    pub newly_connected: bool,
}

pub fn compare(
    baseline: &BTreeMap<CellId, f64>,
    with_sms: &BTreeMap<CellId, f64>,
) -> Result<Vec<ImprovementRecord>, AccessError> {
    let a: BTreeSet<_> = baseline.keys().copied().collect();
    let b: BTreeSet<_> = with_sms.keys().copied().collect();
    if a != b {
        return Err(AccessError::CentroidMismatch(a.symmetric_difference(&b).copied().collect()));
    }
    Ok(baseline
        .iter()
        .map(|(&id, &base)| {
            let with = with_sms[&id];
            let gain = with - base;
            ImprovementRecord {
                centroid_id: id,
                baseline: base,
                with_sms: with,
                absolute_gain: gain,
                relative_gain: gain / base.max(1.0),
                newly_connected: base == 0.0 && with > 0.0,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementSummary {
    pub cells: usize,
    pub improved_cells: usize,
    pub newly_connected: usize,
    pub mean_absolute_gain: f64,
    pub max_absolute_gain: f64,
    pub mean_relative_gain: f64,
    /// Baseline threshold for the restricted mean below.
    pub threshold: f64,
    pub cells_below_threshold: usize,
    /// Mean relative gain over cells whose baseline is below `threshold`.
    pub mean_relative_gain_below_threshold: f64,
}

pub fn summarize(records: &[ImprovementRecord], threshold: f64) -> ImprovementSummary {
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let abs: Vec<f64> = records.iter().map(|r| r.absolute_gain).collect();
    let rel: Vec<f64> = records.iter().map(|r| r.relative_gain).collect();
    let below: Vec<f64> = records.iter().filter(|r| r.baseline < threshold).map(|r| r.relative_gain).collect();
    ImprovementSummary {
        cells: records.len(),
        improved_cells: records.iter().filter(|r| r.absolute_gain > 0.0).count(),
        newly_connected: records.iter().filter(|r| r.newly_connected).count(),
        mean_absolute_gain: mean(&abs),
        max_absolute_gain: abs.iter().copied().fold(0.0, f64::max),
        mean_relative_gain: mean(&rel),
        threshold,
        cells_below_threshold: below.len(),
        mean_relative_gain_below_threshold: mean(&below),
    }
}

/// `centroid_id,depart,score,reachable_cells` rows.
pub fn write_scores_csv<W: Write>(scores: &[AccessibilityScore], out: W) -> Result<(), AccessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["centroid_id", "depart", "score", "reachable_cells"])?;
    for s in scores {
        w.write_record([
            s.centroid_id.to_string(),
            s.depart.to_string(),
            s.reachable_opportunities.to_string(),
            s.reachable_cells.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores_csv<R: Read>(input: R) -> Result<Vec<AccessibilityScore>, AccessError> {
    #[derive(Deserialize)]
    struct Row {
        centroid_id: u32,
        depart: u32,
        score: f64,
        reachable_cells: usize,
    }
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<Row>()
        .map(|row| {
            let row = row?;
            Ok(AccessibilityScore {
                centroid_id: CellId(row.centroid_id),
                depart: row.depart,
                reachable_opportunities: row.score,
                reachable_cells: row.reachable_cells,
            })
        })
        .collect()
}

pub fn write_improvement_csv<W: Write>(records: &[ImprovementRecord], out: W) -> Result<(), AccessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["centroid_id", "baseline", "with_sms", "absolute_gain", "relative_gain", "newly_connected"])?;
    for r in records {
        w.write_record([
            r.centroid_id.to_string(),
            r.baseline.to_string(),
            r.with_sms.to_string(),
            r.absolute_gain.to_string(),
            r.relative_gain.to_string(),
            r.newly_connected.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Hexagon polygons carrying the improvement fields of each cell.
pub fn improvement_geojson(grid: &HexGrid, frame: &Frame, records: &[ImprovementRecord]) -> Value {
    let by_id: BTreeMap<CellId, &ImprovementRecord> = records.iter().map(|r| (r.centroid_id, r)).collect();
    grid.to_geojson(frame, |cell| {
        let mut m = Map::new();
        if let Some(r) = by_id.get(&cell.id) {
            m.insert("baseline".into(), json!(r.baseline));
            m.insert("with_sms".into(), json!(r.with_sms));
            m.insert("absolute_gain".into(), json!(r.absolute_gain));
            m.insert("relative_gain".into(), json!(r.relative_gain));
            m.insert("newly_connected".into(), json!(r.newly_connected));
        }
        m
    })
}
