//! Dense reference computations for kriging and the experimental variogram.

use nalgebra::{DMatrix, DVector};
use sms_access_core::geometry::Point;

pub struct Reference {
    pub weights: Vec<f64>,
    pub lagrange: f64,
    pub estimate: f64,
    pub variance: f64,
}

fn dist(a: Point, b: Point) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

/// Ordinary kriging by explicit inversion of the bordered semivariance matrix.
pub fn ordinary_kriging(query: Point, samples: &[(Point, f64)], sill: f64, range: f64, nugget: f64) -> Reference {
    let gamma = |d: f64| if d == 0.0 { 0.0 } else { nugget + sill * d.min(range) / range };
    let n = samples.len();
    let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut b = DVector::<f64>::zeros(n + 1);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = gamma(dist(samples[i].0, samples[j].0));
        }
        a[(i, n)] = 1.0;
        a[(n, i)] = 1.0;
        b[i] = gamma(dist(query, samples[i].0));
    }
    b[n] = 1.0;
    let x = a.try_inverse().expect("invertible kriging matrix") * &b;
    let weights: Vec<f64> = (0..n).map(|i| x[i]).collect();
    Reference {
        estimate: (0..n).map(|i| weights[i] * samples[i].1).sum(),
        variance: (0..n).map(|i| weights[i] * b[i]).sum::<f64>() + x[n],
        lagrange: x[n],
        weights,
    }
}

/// `(lag, mean semivariance, pair count)` per non-empty bin, by scanning
/// every bin against every pair.
pub fn variogram_bins(samples: &[(Point, f64)], lag: f64, max_lag: f64) -> Vec<(f64, f64, usize)> {
    let mut pairs = Vec::new();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let d = dist(samples[i].0, samples[j].0);
            if d <= max_lag {
                pairs.push((d, 0.5 * (samples[i].1 - samples[j].1) * (samples[i].1 - samples[j].1)));
            }
        }
    }
    let top = (max_lag / lag).ceil() as u64 + 1;
    (0..=top)
        .filter_map(|n| {
            let lo = n as f64 * lag - lag / 2.0;
            let hi = n as f64 * lag + lag / 2.0;
            let inside: Vec<f64> = pairs.iter().filter(|(d, _)| *d >= lo && *d < hi).map(|p| p.1).collect();
            if inside.is_empty() {
                return None;
            }
            let sum = inside.iter().fold(0.0, |s, g| s + g);
            Some((n as f64 * lag, sum / inside.len() as f64, inside.len()))
        })
        .collect()
}
