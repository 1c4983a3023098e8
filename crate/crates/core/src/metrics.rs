//! Precision and recall of realized firings against a prescribed score.
//!
//! Realized spikes in a window of about one period are compared with the
//! periodic prescribed trains through a triangular kernel, after one shared
//! cyclic shift `τ̂` that maximizes the total match.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::SpikeScore;
use crate::sim::SimRun;

/// Relative tolerance for treating two alignment objectives as tied.
const TIE_TOL: f64 = 1e-12;

/// `1 − 2|t|/τ0` on `|t| ≤ τ0/2`, zero elsewhere.
pub fn triangular_kernel(t: f64, tau0: f64) -> f64 {
    let a = t.abs();
    if a <= 0.5 * tau0 {
        1.0 - 2.0 * a / tau0
    } else {
        0.0
    }
}

/// Per-neuron realized firings in `[t0, t0 + T + c_ℓ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedFirings {
    pub t0: f64,
    pub period: f64,
    pub tau0: f64,
    /// Border adjustment per neuron, one of `−τ0, 0, τ0`.
    pub c: Vec<f64>,
    pub sets: Vec<Vec<f64>>,
}

/// Smallest circular distance (modulo `period`) between any two of `times`.
fn min_circular_separation(times: &[f64], period: f64) -> f64 {
    if times.len() < 2 {
        return f64::INFINITY;
    }
    let mut r: Vec<f64> = times.iter().map(|t| t.rem_euclid(period)).collect();
    r.sort_by(f64::total_cmp);
    let mut best = r[0] + period - r[r.len() - 1];
    for w in r.windows(2) {
        best = best.min(w[1] - w[0]);
    }
    best
}

/// Cuts each neuron's sorted firing times to its window.
///
/// `c_ℓ` is the largest of `τ0, 0, −τ0` for which all kept spikes are more
/// than `τ0` apart modulo `T`; if none qualifies, `−τ0` is used.
pub fn window_firings(times: &[Vec<f64>], t0: f64, period: f64, tau0: f64) -> WindowedFirings {
    let mut cs = Vec::with_capacity(times.len());
    let mut sets = Vec::with_capacity(times.len());
    for ts in times {
        let pick = |c: f64| -> Vec<f64> {
            ts.iter()
                .copied()
                .filter(|&t| t >= t0 && t < t0 + period + c)
                .collect()
        };
        let mut chosen = None;
        for c in [tau0, 0.0, -tau0] {
            let set = pick(c);
            if min_circular_separation(&set, period) > tau0 {
                chosen = Some((c, set));
                break;
            }
        }
        let (c, set) = chosen.unwrap_or_else(|| (-tau0, pick(-tau0)));
        cs.push(c);
        sets.push(set);
    }
    WindowedFirings {
        t0,
        period,
        tau0,
        c: cs,
        sets,
    }
}

/// Value of the periodic convolution `(κ * x̆)(t)` for a sorted train in `[0, T)`.
///
/// Prescribed spikes are at least `τ0` apart, so only the circular
/// neighbors on either side of `t` can fall under the triangle.
fn smoothed_train(prescribed: &[f64], period: f64, tau0: f64, t: f64) -> f64 {
    let n = prescribed.len();
    if n == 0 {
        return 0.0;
    }
    let r = t.rem_euclid(period);
    let i = prescribed.partition_point(|&s| s <= r);
    let dist = |s: f64| {
        let d = (r - s).rem_euclid(period);
        d.min(period - d)
    };
    let before = prescribed[(i + n - 1) % n];
    let after = prescribed[i % n];
    let mut total = triangular_kernel(dist(before), tau0);
    if n > 1 {
        total += triangular_kernel(dist(after), tau0);
    }
    total
}

fn alignment_objective(window: &WindowedFirings, score: &SpikeScore, subset: &[usize], tau: f64) -> f64 {
    subset
        .iter()
        .map(|&l| {
            let pre = &score.trains[l].times;
            window.sets[l]
                .iter()
                .map(|&s| smoothed_train(pre, score.period, score.tau0, s - tau))
                .sum::<f64>()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub tau_hat: f64,
    pub objective: f64,
}

/// Exact maximizer over `τ ∈ [0, T)` of the summed smoothed-train values.
///
/// The objective is piecewise linear with kinks where a realized spike sits
/// at the center or an edge of a prescribed triangle, so it is evaluated on
/// those candidates (and `τ = 0`). Ties go to the smallest `τ`.
pub fn best_alignment(window: &WindowedFirings, score: &SpikeScore, subset: &[usize]) -> Alignment {
    let period = score.period;
    let half = 0.5 * score.tau0;
    let mut candidates = vec![0.0];
    for &l in subset {
        for &s in &window.sets[l] {
            for &p in &score.trains[l].times {
                for off in [-half, 0.0, half] {
                    let mut tau = (s - p + off).rem_euclid(period);
                    if tau >= period {
                        tau = 0.0;
                    }
                    candidates.push(tau);
                }
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let values: Vec<f64> = candidates
        .iter()
        .map(|&tau| alignment_objective(window, score, subset, tau))
        .collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOL * max.abs().max(1.0);
    let i = values.iter().position(|&v| v >= max - tol).unwrap_or(0);
    Alignment {
        tau_hat: candidates[i],
        objective: values[i],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronAccuracy {
    pub neuron: usize,
    pub precision: f64,
    pub recall: f64,
    pub realized: usize,
    pub prescribed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub t0: f64,
    pub precision: f64,
    pub recall: f64,
    pub tau_hat: f64,
    pub per_neuron: Vec<NeuronAccuracy>,
}

/// Precision and recall over `neurons` (all neurons when `None`) for the
/// window starting at `t0`, with one shared alignment for the subset.
///
/// A neuron with no realized spikes contributes precision 0, and precision
/// is 0 outright when no neuron of the subset fired. A neuron with no
/// prescribed spikes contributes recall 1, and precision 1 only if it also
/// stayed silent.
pub fn precision_recall(
    times: &[Vec<f64>],
    score: &SpikeScore,
    t0: f64,
    neurons: Option<&[usize]>,
) -> Result<AccuracyReport> {
    let all: Vec<usize>;
    let subset = match neurons {
        Some(s) => s,
        None => {
            all = (0..score.num_neurons()).collect();
            &all
        }
    };
    if subset.is_empty() {
        return Err(Error::param("neuron subset is empty"));
    }
    if times.len() != score.num_neurons() {
        return Err(Error::param("run and score have different neuron counts"));
    }
    if let Some(&bad) = subset.iter().find(|&&l| l >= score.num_neurons()) {
        return Err(Error::param(format!("neuron {bad} out of range")));
    }
    let window = window_firings(times, t0, score.period, score.tau0);
    let align = best_alignment(&window, score, subset);
    let tau = align.tau_hat;
    let mut per_neuron = Vec::with_capacity(subset.len());
    let (mut pr, mut rc) = (0.0, 0.0);
    let mut any_fired = false;
    for &l in subset {
        let pre = &score.trains[l].times;
        let set = &window.sets[l];
        let matched: f64 = set
            .iter()
            .map(|&s| smoothed_train(pre, score.period, score.tau0, s - tau))
            .sum();
        let precision = match (set.is_empty(), pre.is_empty()) {
            (true, true) => 1.0,
            (true, false) => 0.0,
            (false, _) => matched / set.len() as f64,
        };
        let recall = if pre.is_empty() {
            1.0
        } else {
            matched / pre.len() as f64
        };
        any_fired |= !set.is_empty();
        pr += precision;
        rc += recall;
        per_neuron.push(NeuronAccuracy {
            neuron: l,
            precision,
            recall,
            realized: set.len(),
            prescribed: pre.len(),
        });
    }
    let n = subset.len() as f64;
    Ok(AccuracyReport {
        t0,
        precision: if any_fired { pr / n } else { 0.0 },
        recall: rc / n,
        tau_hat: tau,
        per_neuron,
    })
}

/// [`precision_recall`] on a simulation run; the run must cover `t0 + T + τ0`.
pub fn evaluate_run(run: &SimRun, score: &SpikeScore, t0: f64, neurons: Option<&[usize]>) -> Result<AccuracyReport> {
    if t0 + score.period + score.tau0 > run.horizon {
        return Err(Error::param(format!(
            "window starting at {t0} exceeds run horizon {}",
            run.horizon
        )));
    }
    precision_recall(&run.spike_times(), score, t0, neurons)
}

/// CSV with columns `t0,group,precision,recall,tau_hat`.
pub fn reports_to_csv(rows: &[(String, AccuracyReport)]) -> String {
    let mut out = String::from("t0,group,precision,recall,tau_hat\n");
    for (group, r) in rows {
        let _ = writeln!(out, "{},{group},{},{},{}", r.t0, r.precision, r.recall, r.tau_hat);
    }
    out
}
