//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

pub mod fixtures;
pub mod kriging_oracle;
pub mod router_oracle;

use rand::Rng;

/// Round half up on quarter-second inputs, by case analysis.
pub fn round_quarter(x: f64) -> u32 {
    let whole = x.floor();
    if x - whole >= 0.5 {
        whole as u32 + 1
    } else {
        whole as u32
    }
}

/// Walks the day one second at a time and emits a departure whenever the
/// running countdown hits zero.
pub fn step_simulation(waits: &[u32], slot_length: u32, anchor: u32, start: u32, end: u32) -> Vec<u32> {
    let wait = |t: u32| waits[(t / slot_length) as usize];
    let mut out = Vec::new();
    if anchor >= start && anchor < end {
        out.push(anchor);
    }
    // Backward: countdown measured from the later departure.
    let mut remaining = 2 * wait(anchor);
    let mut t = anchor;
    while t > start {
        t -= 1;
        remaining -= 1;
        if remaining == 0 {
            if t < end {
                out.push(t);
            }
            remaining = 2 * wait(t);
        }
    }
    // Forward: countdown measured from the earlier departure.
    let mut remaining = 2 * wait(anchor);
    let mut t = anchor;
    while t + 1 < end {
        t += 1;
        remaining -= 1;
        if remaining == 0 {
            if t >= start {
                out.push(t);
            }
            remaining = 2 * wait(t);
        }
    }
    out.sort_unstable();
    out
}

/// Piecewise-constant wait and travel values in quarter seconds.
pub fn random_slots<R: Rng>(rng: &mut R, n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    let mut w = rng.gen_range(30..1200) as f64;
    let mut y = rng.gen_range(60..2400) as f64;
    for _ in 0..n {
        if rng.gen_bool(0.4) {
            w = rng.gen_range(30..1200) as f64 + f64::from(rng.gen_range(0..4)) * 0.25;
            y = rng.gen_range(60..2400) as f64 + f64::from(rng.gen_range(0..4)) * 0.25;
        }
        out.push((w, y));
    }
    out
}
