use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::GeostatError;
use crate::geometry::{distance, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramBin {
    /// Bin center `n·Δd`, meters.
    pub lag: f64,
    /// Mean of `½·(v_i − v_j)²` over the pairs in the bin.
    pub mean_semivariance: f64,
    pub pair_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentalVariogram {
    pub lag_increment: f64,
    pub bins: Vec<VariogramBin>,
}

/// Index `n` of the bin `[n·Δd − Δd/2, n·Δd + Δd/2)` holding distance `d`.
pub(crate) fn bin_index(d: f64, lag: f64) -> u64 {
    let mut n = (d / lag + 0.5).floor().max(0.0) as u64;
    while n > 0 && d < n as f64 * lag - lag / 2.0 {
        n -= 1;
    }
    while d >= n as f64 * lag + lag / 2.0 {
        n += 1;
    }
    n
}

/// Omnidirectional experimental semivariogram. Pairs farther apart than
/// `max_lag` are ignored and empty bins are omitted.
pub fn experimental_variogram(
    samples: &[(Point, f64)],
    lag_increment: f64,
    max_lag: f64,
) -> Result<ExperimentalVariogram, GeostatError> {
    if samples.len() < 2 {
        return Err(GeostatError::TooFewSamples(samples.len()));
    }
    if !(lag_increment.is_finite() && lag_increment > 0.0) {
        return Err(GeostatError::InvalidParameter(format!(
            "lag increment must be positive, got {lag_increment}"
        )));
    }
    let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for (i, (pi, vi)) in samples.iter().enumerate() {
        for (pj, vj) in &samples[i + 1..] {
            let d = distance(*pi, *pj);
            if d > max_lag {
                continue;
            }
            let gamma = 0.5 * (vi - vj) * (vi - vj);
            let slot = acc.entry(bin_index(d, lag_increment)).or_insert((0.0, 0));
            slot.0 += gamma;
            slot.1 += 1;
        }
    }
    let bins = acc
        .into_iter()
        .map(|(n, (sum, count))| VariogramBin {
            lag: n as f64 * lag_increment,
            mean_semivariance: sum / count as f64,
            pair_count: count,
        })
        .collect();
    Ok(ExperimentalVariogram {
        lag_increment,
        bins,
    })
}

/// Bounded linear semivariogram: `γ(0) = 0` and
/// `γ(d) = nugget + sill·min(d, range)/range` for `d > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramModel {
    pub sill: f64,
    pub range: f64,
    pub nugget: f64,
}

impl VariogramModel {
    pub fn bounded_linear(sill: f64, range: f64, nugget: f64) -> Result<Self, GeostatError> {
        let ok = sill.is_finite() && sill > 0.0 && range.is_finite() && range > 0.0;
        if !ok || !(nugget.is_finite() && nugget >= 0.0) {
            return Err(GeostatError::InvalidParameter(format!(
                "bounded linear model needs sill > 0, range > 0, nugget ≥ 0 (got {sill}, {range}, {nugget})"
            )));
        }
        Ok(Self { sill, range, nugget })
    }

    pub fn semivariance(&self, d: f64) -> f64 {
        if d <= 0.0 {
            0.0
        } else {
            self.nugget + self.sill * d.min(self.range) / self.range
        }
    }

    /// Plateau value `nugget + sill`.
    pub fn total_sill(&self) -> f64 {
        self.nugget + self.sill
    }
}

/// Where the fitted sill came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SillSource {
    /// Bins at lags at or beyond the range.
    Plateau,
    /// No bin reached the range; every bin was used.
    AllBins,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariogramFit {
    pub model: VariogramModel,
    pub sill_source: SillSource,
}

/// Fixes the range and takes the sill as the pair-weighted mean semivariance
/// of the plateau bins (lags ≥ range). Nugget is zero.
pub fn fit_bounded_linear(
    ev: &ExperimentalVariogram,
    range: f64,
) -> Result<VariogramFit, GeostatError> {
    if ev.bins.is_empty() {
        return Err(GeostatError::NoBins);
    }
    let weighted = |bins: &mut dyn Iterator<Item = &VariogramBin>| {
        let (sum, count) = bins.fold((0.0, 0usize), |(s, c), b| {
            (s + b.mean_semivariance * b.pair_count as f64, c + b.pair_count)
        });
        (count > 0).then(|| sum / count as f64)
    };
    let (sill, sill_source) = match weighted(&mut ev.bins.iter().filter(|b| b.lag >= range)) {
        Some(s) => (s, SillSource::Plateau),
        None => (
            weighted(&mut ev.bins.iter()).expect("bins are non-empty"),
            SillSource::AllBins,
        ),
    };
    if !(sill.is_finite() && sill > 0.0) {
        return Err(GeostatError::DegenerateVariogram);
    }
    Ok(VariogramFit {
        model: VariogramModel::bounded_linear(sill, range, 0.0)?,
        sill_source,
    })
}
