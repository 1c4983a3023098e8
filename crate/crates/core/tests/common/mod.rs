//! Helpers shared by the integration tests: random synthesized instances and
//! brute-force simulation oracles.
#![allow(dead_code)]

pub mod alignment;
pub mod stats;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spikeloop::model::{build_random_network, Network, TopologyParams};
use spikeloop::score::{count_pmf, sample_score, SpikeScore};
use spikeloop::sim::{simulate, InitMode, SimConfig};
use spikeloop::stability::GlobalFiringOrder;
use spikeloop::synth::{synthesize_network, SolveOptions, TemplateParams};

/// Random network and score with unit `β`, `θ0`, `τ0` and rate `0.2/τ0`.
pub fn instance(seed: u64, l: usize, k: usize, period: f64) -> (Network, SpikeScore) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tp = TopologyParams {
        num_neurons: l,
        num_inputs: k,
        ..Default::default()
    };
    let net = build_random_network(&tp, &mut rng).unwrap();
    let pmf = count_pmf(0.2, period, 1.0).unwrap();
    let score = sample_score(l, &pmf, &mut rng).unwrap();
    (net, score)
}

/// Like [`instance`], with weights synthesized under `params`. `None` when
/// some neuron is infeasible.
pub fn synthesized(seed: u64, l: usize, k: usize, period: f64, params: &TemplateParams) -> Option<(Network, SpikeScore)> {
    let (mut net, score) = instance(seed, l, k, period);
    let res = synthesize_network(&mut net, &[&score], params, &SolveOptions::default(), true).unwrap();
    res.feasible.then_some((net, score))
}

/// Prescribed firings with times in `[from, to)`, shifted by `−origin`.
fn history(score: &SpikeScore, from: f64, to: f64, origin: f64) -> Vec<Vec<f64>> {
    score
        .trains
        .iter()
        .map(|t| t.images_in(from, to).into_iter().map(|s| s - origin).collect())
        .collect()
}

/// First firing time of `neuron` after the history, relative to the history's origin.
fn first_firing(net: &Network, hist: Vec<Vec<f64>>, neuron: usize, horizon: f64) -> Option<f64> {
    let cfg = SimConfig::new(horizon, 0.0, InitMode::History(hist));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let run = simulate(net, &cfg, None, &mut rng).unwrap();
    run.times(neuron).first().copied()
}

/// Central finite-difference estimate of `∂s_n/∂s_{n−lag}`: every firing
/// before `s̆_n` is replayed as fixed history, the predecessor is moved by
/// `±δ`, and the first firing of `ℓ(n)` is located by simulation.
pub fn fd_coefficient(net: &Network, score: &SpikeScore, n: usize, lag: usize, delta: f64) -> Option<f64> {
    let order = GlobalFiringOrder::new(score);
    let owner = order.owners[n];
    let s = order.times[n];
    let (_, before) = order.predecessor(n, 1);
    // the origin sits strictly between s̆_n and the latest earlier firing
    let gap = (s - before).min(1e-2);
    let origin = s - 0.5 * gap;
    let from = s - score.period - net.d_max - net.kernel().cutoff() - 1.0;
    let (m, t_m) = order.predecessor(n, lag);
    let base = history(score, from, origin, origin);
    let shifted = |d: f64| {
        let mut h = base.clone();
        let target = t_m - origin;
        let slot = h[order.owners[m]]
            .iter()
            .position(|&t| (t - target).abs() < 1e-9)
            .expect("predecessor is in the history");
        h[order.owners[m]][slot] += d;
        first_firing(net, h, owner, 2.0 * gap)
    };
    let plus = shifted(delta)?;
    let minus = shifted(-delta)?;
    Some((plus - minus) / (2.0 * delta))
}

/// Realized minus nominal time of every firing in `[0, periods·T)`, grouped
/// by period. Each realized firing is paired with the nearest prescribed
/// image of its neuron.
pub fn jitter_by_period(
    net: &Network,
    score: &SpikeScore,
    initial_jitter: &[Vec<f64>],
    periods: usize,
) -> Vec<Vec<f64>> {
    let from = -net.d_max - net.kernel().cutoff() - score.period;
    let mut hist = history(score, from, 0.0, 0.0);
    for (h, j) in hist.iter_mut().zip(initial_jitter) {
        for (t, dj) in h.iter_mut().zip(j) {
            *t += dj;
        }
    }
    let horizon = periods as f64 * score.period;
    let cfg = SimConfig::new(horizon, 0.0, InitMode::History(hist));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let run = simulate(net, &cfg, None, &mut rng).unwrap();
    let mut out = vec![Vec::new(); periods];
    for (l, train) in score.trains.iter().enumerate() {
        let nominal = train.images_in(-score.period, horizon + score.period);
        for t in run.times(l) {
            let near = nominal
                .iter()
                .copied()
                .min_by(|a, b| (a - t).abs().total_cmp(&(b - t).abs()))
                .expect("neuron fires in the score");
            let k = ((near / score.period).floor() as usize).min(periods - 1);
            out[k].push(t - near);
        }
    }
    out
}

/// Root-mean-square deviation of `xs` from their mean.
pub fn spread(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

pub fn default_params() -> TemplateParams {
    TemplateParams::defaults(1.0, 1.0)
}
