//! Brute-force precision/recall: naive window selection, a direct sum over
//! periodic images, and a dense grid of shifts.
//!
//! With `τ0 = 1` and every time on the lattice `LATTICE·ℤ`, all kinks of the
//! piecewise-linear alignment objective lie on the lattice, so the grid
//! search finds the exact maximum.

use rand::Rng;
use spikeloop::score::{SpikeScore, SpikeTrain};

pub const LATTICE: f64 = 1.0 / 256.0;

fn tri(t: f64) -> f64 {
    (1.0 - 2.0 * t.abs()).max(0.0)
}

fn circ_sep_ok(set: &[f64], period: f64) -> bool {
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            let d = (set[i] - set[j]).rem_euclid(period);
            if d.min(period - d) <= 1.0 {
                return false;
            }
        }
    }
    true
}

pub fn window(times: &[Vec<f64>], t0: f64, period: f64) -> Vec<Vec<f64>> {
    times
        .iter()
        .map(|ts| {
            let pick = |c: f64| ts.iter().copied().filter(|&t| t >= t0 && t < t0 + period + c).collect::<Vec<_>>();
            [1.0, 0.0]
                .into_iter()
                .map(pick)
                .find(|s| circ_sep_ok(s, period))
                .unwrap_or_else(|| pick(-1.0))
        })
        .collect()
}

fn matched(set: &[f64], pre: &[f64], period: f64, tau: f64) -> f64 {
    let mut total = 0.0;
    for &s in set {
        for &p in pre {
            for k in -6..=6 {
                total += tri(s - tau - p - k as f64 * period);
            }
        }
    }
    total
}

pub struct Oracle {
    pub precision: f64,
    pub recall: f64,
    pub tau: f64,
    pub objective: f64,
    /// Number of lattice shifts attaining the maximum.
    pub maximizers: usize,
    /// Whether the maximizing shifts disagree on precision or recall.
    pub ambiguous: bool,
}

pub fn oracle(times: &[Vec<f64>], score: &SpikeScore, t0: f64, subset: &[usize]) -> Oracle {
    let period = score.period;
    let sets = window(times, t0, period);
    let steps = (period / LATTICE).round() as usize;
    let objective = |tau: f64| -> f64 {
        subset
            .iter()
            .map(|&l| matched(&sets[l], &score.trains[l].times, period, tau))
            .sum()
    };
    let values: Vec<f64> = (0..steps).map(|i| objective(i as f64 * LATTICE)).collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * max.abs().max(1.0);
    let best = values.iter().position(|&v| v >= max - tol).unwrap();
    let maximizers = values.iter().filter(|&&v| v >= max - tol).count();
    let accuracy = |tau: f64| {
        let (mut pr, mut rc) = (0.0, 0.0);
        let mut fired = false;
        for &l in subset {
            let pre = &score.trains[l].times;
            let m = matched(&sets[l], pre, period, tau);
            fired |= !sets[l].is_empty();
            pr += match (sets[l].is_empty(), pre.is_empty()) {
                (true, true) => 1.0,
                (true, false) => 0.0,
                (false, _) => m / sets[l].len() as f64,
            };
            rc += if pre.is_empty() { 1.0 } else { m / pre.len() as f64 };
        }
        let n = subset.len() as f64;
        (if fired { pr / n } else { 0.0 }, rc / n)
    };
    let tau = best as f64 * LATTICE;
    let (precision, recall) = accuracy(tau);
    let ambiguous = (0..steps).filter(|&i| values[i] >= max - tol).any(|i| {
        let (p, r) = accuracy(i as f64 * LATTICE);
        (p - precision).abs() > 1e-12 || (r - recall).abs() > 1e-12
    });
    Oracle {
        precision,
        recall,
        tau,
        objective: max,
        maximizers,
        ambiguous,
    }
}

fn lattice_point<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let a = (lo / LATTICE).ceil() as i64;
    let b = (hi / LATTICE).floor() as i64;
    rng.random_range(a..=b) as f64 * LATTICE
}

/// Small random lattice instance: a score with up to 4 neurons and a run
/// with refractory gaps `≥ τ0` around the window `[t0, t0 + T + τ0)`.
pub fn lattice_instance<R: Rng>(rng: &mut R) -> (SpikeScore, Vec<Vec<f64>>, f64) {
    let period = [6.0, 8.0, 10.0][rng.random_range(0..3)];
    let l = rng.random_range(1..=4);
    let mut trains = Vec::with_capacity(l);
    for _ in 0..l {
        let times = loop {
            let n = rng.random_range(0..=4);
            let mut ts: Vec<f64> = (0..n).map(|_| lattice_point(rng, 0.0, period - LATTICE)).collect();
            ts.sort_by(f64::total_cmp);
            if ts.len() < 2 || circ_gaps_at_least_one(&ts, period) {
                break ts;
            }
        };
        trains.push(SpikeTrain::new(period, times));
    }
    let score = SpikeScore::new(1.0, period, trains).unwrap();
    let t0 = lattice_point(rng, 0.0, 3.0 * period);
    let run = (0..l)
        .map(|_| {
            let mut ts = Vec::new();
            let mut t = t0 - 2.0 + lattice_point(rng, 0.0, 1.5);
            let end = t0 + period + 2.0;
            while t < end {
                if rng.random_bool(0.8) {
                    ts.push(t);
                }
                t += 1.0 + lattice_point(rng, 0.0, 3.0);
            }
            ts
        })
        .collect();
    (score, run, t0)
}

fn circ_gaps_at_least_one(ts: &[f64], period: f64) -> bool {
    ts.windows(2).all(|w| w[1] - w[0] >= 1.0) && ts[0] + period - ts[ts.len() - 1] >= 1.0
}
