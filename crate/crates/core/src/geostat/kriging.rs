use serde::{Deserialize, Serialize};

use super::linalg;
use super::variogram::VariogramModel;
use super::GeostatError;
use crate::geometry::{distance, Point};

/// Samples closer than this are merged before the system is assembled.
pub const DUPLICATE_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    OrdinaryKriging,
    /// The kriging matrix was singular; weights are inverse squared distances.
    InverseDistance,
}

/// A solved estimation at one query point.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigingSystem {
    /// Samples actually used: within range of the query, duplicates merged.
    pub samples: Vec<(Point, f64)>,
    pub weights: Vec<f64>,
    pub lagrange_multiplier: f64,
    pub estimate: f64,
    /// `Σ λ_i γ(x, x_i) + μ`; NaN for the inverse-distance fallback.
    pub kriging_variance: f64,
    pub method: SolveMethod,
}

/// Keeps samples within `range` of `query` and averages values of samples
/// closer than [`DUPLICATE_DISTANCE_M`] to the first sample of their group.
pub fn neighbourhood(query: Point, samples: &[(Point, f64)], range: f64) -> Vec<(Point, f64)> {
    let mut groups: Vec<(Point, f64, usize)> = Vec::new();
    for &(p, v) in samples {
        if distance(p, query) > range {
            continue;
        }
        match groups
            .iter_mut()
            .find(|(g, _, _)| distance(*g, p) < DUPLICATE_DISTANCE_M)
        {
            Some(group) => {
                group.1 += v;
                group.2 += 1;
            }
            None => groups.push((p, v, 1)),
        }
    }
    groups
        .into_iter()
        .map(|(p, sum, n)| (p, sum / n as f64))
        .collect()
}

/// Ordinary kriging at `query`.
///
/// Minimizes the estimation variance `2 Σ λ_i γ(x, x_i) − Σ λ_i λ_j γ(x_i, x_j)`
/// subject to `Σ λ_i = 1` through the Lagrange system
///
/// ```text
/// | γ(x_i, x_j)  1 | |λ|   |γ(x, x_i)|
/// | 1ᵀ           0 | |μ| = |1        |
/// ```
///
/// Semivariances are divided by the total sill before solving, which leaves
/// the weights unchanged and keeps the matrix well scaled.
pub fn krige(
    query: Point,
    samples: &[(Point, f64)],
    model: &VariogramModel,
) -> Result<KrigingSystem, GeostatError> {
    let used = neighbourhood(query, samples, model.range);
    if used.is_empty() {
        return Err(GeostatError::Unestimable);
    }
    let n = used.len();
    let scale = model.total_sill();
    let size = n + 1;
    let mut a = vec![0.0; size * size];
    let mut b = vec![0.0; size];
    for i in 0..n {
        for j in 0..n {
            a[i * size + j] = model.semivariance(distance(used[i].0, used[j].0)) / scale;
        }
        a[i * size + n] = 1.0;
        a[n * size + i] = 1.0;
        b[i] = model.semivariance(distance(query, used[i].0)) / scale;
    }
    b[n] = 1.0;

    match linalg::solve(&a, &b) {
        Ok(x) => {
            let weights = x[..n].to_vec();
            let mu = x[n] * scale;
            let estimate = weights.iter().zip(&used).map(|(w, (_, v))| w * v).sum();
            let variance = weights
                .iter()
                .zip(&b[..n])
                .map(|(w, g)| w * g * scale)
                .sum::<f64>()
                + mu;
            Ok(KrigingSystem {
                samples: used,
                weights,
                lagrange_multiplier: mu,
                estimate,
                kriging_variance: variance,
                method: SolveMethod::OrdinaryKriging,
            })
        }
        Err(linalg::Singular) => {
            log::debug!("singular kriging system with {n} samples; using inverse distance");
            Ok(inverse_distance(query, used))
        }
    }
}

/// Inverse squared-distance weighting; an exact hit takes all the weight.
pub fn inverse_distance(query: Point, samples: Vec<(Point, f64)>) -> KrigingSystem {
    let raw: Vec<f64> = samples
        .iter()
        .map(|(p, _)| {
            let d = distance(*p, query);
            if d == 0.0 {
                f64::INFINITY
            } else {
                1.0 / (d * d)
            }
        })
        .collect();
    let weights: Vec<f64> = if raw.iter().any(|w| w.is_infinite()) {
        raw.iter().map(|w| if w.is_infinite() { 1.0 } else { 0.0 }).collect()
    } else {
        let total: f64 = raw.iter().sum();
        raw.iter().map(|w| w / total).collect()
    };
    let estimate = weights.iter().zip(&samples).map(|(w, (_, v))| w * v).sum();
    KrigingSystem {
        samples,
        weights,
        lagrange_multiplier: 0.0,
        estimate,
        kriging_variance: f64::NAN,
        method: SolveMethod::InverseDistance,
    }
}
