use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kriging::{krige, SolveMethod};
use super::variogram::{experimental_variogram, fit_bounded_linear, ExperimentalVariogram, VariogramFit};
use super::GeostatError;
use crate::geometry::{CellId, Point};
use crate::observations::{Direction, Observation, TimeslotDataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationParams {
    /// Bin width Δd of the experimental variogram, meters.
    pub lag_increment: f64,
    /// Variogram range, meters. Also the search radius of each solve.
    pub range: f64,
    /// Pairs farther apart are ignored; `None` means twice the range.
    pub max_lag: Option<f64>,
    /// Below this many observations the dataset mean is used everywhere.
    pub min_samples: usize,
}

impl Default for EstimationParams {
    fn default() -> Self {
        Self {
            lag_increment: 100.0,
            range: 3000.0,
            max_lag: None,
            min_samples: 5,
        }
    }
}

impl EstimationParams {
    pub fn effective_max_lag(&self) -> f64 {
        self.max_lag.unwrap_or(2.0 * self.range)
    }

    pub fn validate(&self) -> Result<(), GeostatError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.lag_increment) || !pos(self.range) || !self.effective_max_lag().is_finite() {
            return Err(GeostatError::InvalidParameter(format!(
                "lag increment, range and max lag must be positive and finite: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateFlags {
    /// At least one field used the dataset mean.
    pub mean_fallback: bool,
    /// At least one field fell back to inverse-distance weighting.
    pub inverse_distance: bool,
    /// At least one field was negative and clamped to zero.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellEstimate {
    pub wait: f64,
    pub travel: f64,
    /// Samples in the kriging neighbourhood, or the dataset size under mean fallback.
    pub support: usize,
    pub flags: EstimateFlags,
}

/// Why a field skipped kriging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldFallback {
    TooFewSamples,
    NoBins,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDiagnostics {
    pub variogram: Option<ExperimentalVariogram>,
    pub fit: Option<VariogramFit>,
    pub fallback: Option<FieldFallback>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSurface {
    pub hub_id: String,
    pub direction: Direction,
    pub slot_start: u32,
    pub slot_length: u32,
    pub estimates: BTreeMap<CellId, CellEstimate>,
    /// Centroids with no observation within range.
    pub unestimable: Vec<CellId>,
    pub wait_diagnostics: FieldDiagnostics,
    pub travel_diagnostics: FieldDiagnostics,
}

impl EstimateSurface {
    pub fn wait(&self, id: CellId) -> Option<f64> {
        self.estimates.get(&id).map(|e| e.wait)
    }

    pub fn travel(&self, id: CellId) -> Option<f64> {
        self.estimates.get(&id).map(|e| e.travel)
    }

    pub fn support(&self, id: CellId) -> Option<usize> {
        self.estimates.get(&id).map(|e| e.support)
    }
}

enum FieldModel {
    Mean(f64),
    Kriged(VariogramFit),
}

struct Field {
    samples: Vec<(Point, f64)>,
    model: FieldModel,
    diagnostics: FieldDiagnostics,
}

fn prepare(samples: Vec<(Point, f64)>, params: &EstimationParams) -> Result<Field, GeostatError> {
    let mean = samples.iter().map(|(_, v)| v).sum::<f64>() / samples.len() as f64;
    let mut diagnostics = FieldDiagnostics {
        variogram: None,
        fit: None,
        fallback: None,
        mean,
    };
    if samples.len() < params.min_samples.max(2) {
        diagnostics.fallback = Some(FieldFallback::TooFewSamples);
        return Ok(Field { samples, model: FieldModel::Mean(mean), diagnostics });
    }
    let ev = experimental_variogram(&samples, params.lag_increment, params.effective_max_lag())?;
    let fit = fit_bounded_linear(&ev, params.range);
    diagnostics.variogram = Some(ev);
    let model = match fit {
        Ok(fit) => {
            diagnostics.fit = Some(fit);
            FieldModel::Kriged(fit)
        }
        Err(GeostatError::NoBins) => {
            diagnostics.fallback = Some(FieldFallback::NoBins);
            FieldModel::Mean(mean)
        }
        Err(GeostatError::DegenerateVariogram) => {
            diagnostics.fallback = Some(FieldFallback::Degenerate);
            FieldModel::Mean(mean)
        }
        Err(e) => return Err(e),
    };
    Ok(Field { samples, model, diagnostics })
}

struct Value {
    value: f64,
    support: usize,
    flags: EstimateFlags,
}

fn estimate_at(field: &Field, query: Point) -> Option<Value> {
    let mut flags = EstimateFlags::default();
    let (raw, support) = match &field.model {
        FieldModel::Mean(m) => {
            flags.mean_fallback = true;
            (*m, field.samples.len())
        }
        FieldModel::Kriged(fit) => match krige(query, &field.samples, &fit.model) {
            Ok(sys) => {
                flags.inverse_distance = sys.method == SolveMethod::InverseDistance;
                (sys.estimate, sys.samples.len())
            }
            Err(_) => return None,
        },
    };
    let value = if raw < 0.0 {
        flags.clamped = true;
        0.0
    } else {
        raw
    };
    Some(Value { value, support, flags })
}

/// Kriges expected wait and in-vehicle time at every centroid.
///
/// Each field gets its own variogram. A field with fewer than
/// `params.min_samples` observations, or whose variogram is empty or flat,
/// uses the dataset mean at every centroid instead.
pub fn estimate_surface(
    ds: &TimeslotDataset,
    centroids: &[(CellId, Point)],
    params: &EstimationParams,
) -> Result<EstimateSurface, GeostatError> {
    params.validate()?;
    if ds.is_empty() {
        return Err(GeostatError::EmptyDataset);
    }
    let column = |f: fn(&Observation) -> f64| ds.observations.iter().map(|o| (o.location, f(o))).collect();
    let wait = prepare(column(|o| o.wait), params)?;
    let travel = prepare(column(|o| o.in_vehicle), params)?;

    let solved: Vec<(CellId, Option<CellEstimate>)> = centroids
        .par_iter()
        .map(|&(id, p)| {
            let cell = match (estimate_at(&wait, p), estimate_at(&travel, p)) {
                (Some(w), Some(t)) => Some(CellEstimate {
                    wait: w.value,
                    travel: t.value,
                    support: w.support.max(t.support),
                    flags: EstimateFlags {
                        mean_fallback: w.flags.mean_fallback || t.flags.mean_fallback,
                        inverse_distance: w.flags.inverse_distance || t.flags.inverse_distance,
                        clamped: w.flags.clamped || t.flags.clamped,
                    },
                }),
                _ => None,
            };
            (id, cell)
        })
        .collect();

    let mut estimates = BTreeMap::new();
    let mut unestimable = Vec::new();
    for (id, cell) in solved {
        match cell {
            Some(c) => {
                estimates.insert(id, c);
            }
            None => unestimable.push(id),
        }
    }
    unestimable.sort();
    Ok(EstimateSurface {
        hub_id: ds.hub_id.clone(),
        direction: ds.direction,
        slot_start: ds.slot_start,
        slot_length: ds.slot_length,
        estimates,
        unestimable,
        wait_diagnostics: wait.diagnostics,
        travel_diagnostics: travel.diagnostics,
    })
}

/// Writes `centroid_id,w_hat_s,y_hat_s,support` rows.
pub fn write_surface_csv<W: Write>(surface: &EstimateSurface, out: W) -> Result<(), GeostatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["centroid_id", "w_hat_s", "y_hat_s", "support"])?;
    for (id, e) in &surface.estimates {
        w.write_record([
            id.to_string(),
            e.wait.to_string(),
            e.travel.to_string(),
            e.support.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the variogram bins of both fields with the fitted model repeated on each row.
pub fn write_variogram_csv<W: Write>(surface: &EstimateSurface, out: W) -> Result<(), GeostatError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["field", "lag_m", "mean_semivariance", "pair_count", "sill", "range_m", "nugget"])?;
    for (name, d) in [("wait", &surface.wait_diagnostics), ("travel", &surface.travel_diagnostics)] {
        let Some(ev) = &d.variogram else { continue };
        let (sill, range, nugget) = match &d.fit {
            Some(f) => (f.model.sill.to_string(), f.model.range.to_string(), f.model.nugget.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        for b in &ev.bins {
            w.write_record([
                name.to_string(),
                b.lag.to_string(),
                b.mean_semivariance.to_string(),
                b.pair_count.to_string(),
                sill.clone(),
                range.clone(),
                nugget.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
