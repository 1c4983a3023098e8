//! Random periodic spike scores.
//!
//! Spike counts follow the refractory-modified Poisson law
//! `P(N = n) ∝ (λ(T − nτ0))^(n−1) / n!` for `0 ≤ n < T/τ0`; firing positions are
//! drawn by placing `n` refractory blocks uniformly on the circle. Jittered copies
//! of a train are produced by Gibbs sampling over truncated Gaussians so the
//! refractory gaps survive the perturbation.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack used when validating refractory gaps computed in floating point.
pub const GAP_TOL: f64 = 1e-9;

/// A periodic spike train: the firing times of one period `[0, T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    pub period: f64,
    pub times: Vec<f64>,
}

impl SpikeTrain {
    pub fn new(period: f64, mut times: Vec<f64>) -> Self {
        times.sort_by(f64::total_cmp);
        SpikeTrain { period, times }
    }

    pub fn empty(period: f64) -> Self {
        SpikeTrain {
            period,
            times: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Smallest circular gap between consecutive spikes, including the gap across
    /// the period seam. `None` for trains with fewer than two spikes.
    pub fn min_circular_gap(&self) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let seam = self.period - self.times[self.times.len() - 1] + self.times[0];
        let inner = self
            .times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        Some(inner.min(seam))
    }

    /// Checks range, ordering and the circular refractory constraint.
    pub fn validate(&self, tau0: f64) -> Result<()> {
        if !(self.period > 0.0) {
            return Err(Error::InvariantViolation(format!(
                "period must be positive, got {}",
                self.period
            )));
        }
        if let Some(&t) = self
            .times
            .iter()
            .find(|&&t| !t.is_finite() || t < 0.0 || t >= self.period)
        {
            return Err(Error::InvariantViolation(format!(
                "firing time {t} outside [0, {})",
                self.period
            )));
        }
        if self.times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvariantViolation("firing times not sorted".into()));
        }
        if self.times.len() as f64 * tau0 > self.period + GAP_TOL {
            return Err(Error::InvariantViolation(format!(
                "{} spikes do not fit in period {} with refractory {}",
                self.times.len(),
                self.period,
                tau0
            )));
        }
        if let Some(gap) = self.min_circular_gap() {
            if gap < tau0 - GAP_TOL {
                return Err(Error::InvariantViolation(format!(
                    "circular gap {gap} smaller than refractory period {tau0}"
                )));
            }
        }
        Ok(())
    }

    /// Firing times of the periodic extension that fall in `[from, to)`.
    pub fn images_in(&self, from: f64, to: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if self.times.is_empty() || to <= from {
            return out;
        }
        let first_period = (from / self.period).floor() as i64 - 1;
        let last_period = (to / self.period).ceil() as i64 + 1;
        for p in first_period..=last_period {
            let offset = p as f64 * self.period;
            for &t in &self.times {
                let s = t + offset;
                if s >= from && s < to {
                    out.push(s);
                }
            }
        }
        out
    }
}

/// A score of `L` periodic spike trains sharing one period and refractory time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawScore", into = "RawScore")]
pub struct SpikeScore {
    pub tau0: f64,
    pub period: f64,
    pub trains: Vec<SpikeTrain>,
}

/// On-disk layout: trains are plain arrays of times; the period lives on the score.
#[derive(Serialize, Deserialize)]
struct RawScore {
    tau0: f64,
    period: f64,
    trains: Vec<Vec<f64>>,
}

impl From<RawScore> for SpikeScore {
    fn from(raw: RawScore) -> Self {
        SpikeScore {
            tau0: raw.tau0,
            period: raw.period,
            trains: raw
                .trains
                .into_iter()
                .map(|times| SpikeTrain {
                    period: raw.period,
                    times,
                })
                .collect(),
        }
    }
}

impl From<SpikeScore> for RawScore {
    fn from(score: SpikeScore) -> Self {
        RawScore {
            tau0: score.tau0,
            period: score.period,
            trains: score.trains.into_iter().map(|t| t.times).collect(),
        }
    }
}

impl SpikeScore {
    pub fn new(tau0: f64, period: f64, trains: Vec<SpikeTrain>) -> Result<Self> {
        let score = SpikeScore {
            tau0,
            period,
            trains,
        };
        score.validate()?;
        Ok(score)
    }

    pub fn num_neurons(&self) -> usize {
        self.trains.len()
    }

    pub fn total_spikes(&self) -> usize {
        self.trains.iter().map(SpikeTrain::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau0 > 0.0) {
            return Err(Error::InvariantViolation(format!(
                "refractory period must be positive, got {}",
                self.tau0
            )));
        }
        for (i, train) in self.trains.iter().enumerate() {
            if train.period != self.period {
                return Err(Error::InvariantViolation(format!(
                    "train {i} has period {} but score has {}",
                    train.period, self.period
                )));
            }
            train
                .validate(self.tau0)
                .map_err(|e| Error::InvariantViolation(format!("train {i}: {e}")))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let score: SpikeScore = serde_json::from_str(text)?;
        score.validate()?;
        Ok(score)
    }
}

/// Probability mass function of the number of spikes per period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountPmf {
    pub rate: f64,
    pub period: f64,
    pub tau0: f64,
    /// `probs[n] = P(N = n)`; entries past the end are zero.
    pub probs: Vec<f64>,
    /// Normalizing factor of the unnormalized weights `(λ(T − nτ0))^(n−1) / n!`.
    pub gamma: f64,
    ln_gamma: f64,
}

/// Relative log-weight below which tail terms are dropped (below f64 resolution).
const PMF_LOG_CUTOFF: f64 = 745.0;

/// Computes the spike-count law of one period.
pub fn count_pmf(rate: f64, period: f64, tau0: f64) -> Result<CountPmf> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::param(format!("rate must be positive, got {rate}")));
    }
    if !(tau0 > 0.0 && period > tau0 && period.is_finite()) {
        return Err(Error::param(format!(
            "need period > tau0 > 0, got period {period}, tau0 {tau0}"
        )));
    }
    let mut log_weights: Vec<f64> = Vec::new();
    let mut ln_fact = 0.0;
    let mut best = f64::NEG_INFINITY;
    let mut n = 0usize;
    loop {
        let free = period - n as f64 * tau0;
        if free <= 0.0 {
            break;
        }
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        let lw = (n as f64 - 1.0) * (rate * free).ln() - ln_fact;
        best = best.max(lw);
        log_weights.push(lw);
        // past the mode the weights decrease monotonically
        if n > 1 && lw < log_weights[n - 1] && lw < best - PMF_LOG_CUTOFF {
            break;
        }
        n += 1;
    }
    let sum: f64 = log_weights.iter().map(|lw| (lw - best).exp()).sum();
    let ln_norm = best + sum.ln();
    let probs: Vec<f64> = log_weights.iter().map(|lw| (lw - ln_norm).exp()).collect();
    Ok(CountPmf {
        rate,
        period,
        tau0,
        probs,
        gamma: (-ln_norm).exp(),
        ln_gamma: -ln_norm,
    })
}

impl CountPmf {
    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    /// `ln γ`, usable when `γ` itself over- or underflows.
    pub fn ln_gamma(&self) -> f64 {
        self.ln_gamma
    }

    /// Expected number of spikes per period, `Σ n P(N = n)`.
    pub fn expected_count(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    pub fn sample_count<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (n, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return n;
            }
        }
        // u fell into the rounding slack of the cumulative sum
        self.probs
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(0)
    }
}

/// Samples one periodic spike train.
pub fn sample_spike_train<R: Rng + ?Sized>(pmf: &CountPmf, rng: &mut R) -> SpikeTrain {
    let (period, tau0) = (pmf.period, pmf.tau0);
    loop {
        let n = pmf.sample_count(rng);
        if n == 0 {
            return SpikeTrain::empty(period);
        }
        let first = rng.random_range(0.0..period);
        let slack = (period - n as f64 * tau0).max(0.0);
        let mut offsets: Vec<f64> = (1..n).map(|_| rng.random_range(0.0..=slack)).collect();
        offsets.sort_by(f64::total_cmp);
        let mut times = Vec::with_capacity(n);
        times.push(first);
        for (i, u) in offsets.iter().enumerate() {
            times.push(first + (i + 1) as f64 * tau0 + u);
        }
        let times: Vec<f64> = times
            .into_iter()
            .map(|t| {
                let r = t.rem_euclid(period);
                // rem_euclid can round up to exactly `period`
                if r >= period {
                    0.0
                } else {
                    r
                }
            })
            .collect();
        let train = SpikeTrain::new(period, times);
        // The block construction guarantees every circular gap ≥ τ0; rounding in the
        // modular reduction can still shave off an ulp, in which case we redraw.
        if train
            .min_circular_gap()
            .is_none_or(|g| g >= tau0 - 1e-12)
        {
            return train;
        }
    }
}

/// Samples `num_neurons` independent trains.
pub fn sample_score<R: Rng + ?Sized>(
    num_neurons: usize,
    pmf: &CountPmf,
    rng: &mut R,
) -> Result<SpikeScore> {
    if num_neurons == 0 {
        return Err(Error::param("a score needs at least one neuron"));
    }
    let trains = (0..num_neurons)
        .map(|_| sample_spike_train(pmf, rng))
        .collect();
    Ok(SpikeScore {
        tau0: pmf.tau0,
        period: pmf.period,
        trains,
    })
}

/// Boundary factors of the Gibbs chain on a sequence of spikes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// First and last spike are refractory-coupled across the period seam.
    Periodic { period: f64 },
    /// No constraint on the first and last spike beyond their single neighbor.
    Open,
    /// First spike must exceed `lower`, last spike must stay below `upper`.
    Bounded { lower: f64, upper: f64 },
}

/// Draws a jittered copy of a periodic train (periodic seam coupling).
pub fn jitter_train<R: Rng + ?Sized>(
    train: &SpikeTrain,
    tau0: f64,
    sigma: f64,
    sweeps: usize,
    rng: &mut R,
) -> Result<SpikeTrain> {
    let jittered = gibbs_jitter(
        &train.times,
        tau0,
        sigma,
        sweeps,
        Boundary::Periodic {
            period: train.period,
        },
        rng,
    )?;
    let period = train.period;
    let times = jittered
        .into_iter()
        .map(|t| {
            let r = t.rem_euclid(period);
            if r >= period {
                0.0
            } else {
                r
            }
        })
        .collect();
    Ok(SpikeTrain::new(period, times))
}

/// Gibbs sampler for Gaussian jitter around `nominal` (sorted) that keeps every
/// pair of consecutive spikes more than `tau0` apart.
///
/// Each sweep updates the even-indexed spikes, then the odd-indexed ones; each
/// update draws from `N(nominal_k, sigma²)` truncated to
/// `(s_{k−1} + tau0, s_{k+1} − tau0)`. Updates are done in place, which equals
/// the two-phase schedule whenever the even and odd sets are independent given
/// each other, and keeps the seam valid for an odd count under periodic coupling.
pub fn gibbs_jitter<R: Rng + ?Sized>(
    nominal: &[f64],
    tau0: f64,
    sigma: f64,
    sweeps: usize,
    boundary: Boundary,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) {
        return Err(Error::param(format!("jitter sigma must be ≥ 0, got {sigma}")));
    }
    if sweeps == 0 {
        return Err(Error::param("need at least one Gibbs sweep"));
    }
    let n = nominal.len();
    let mut s = nominal.to_vec();
    if n == 0 || sigma == 0.0 {
        return Ok(s);
    }
    let bounds = |s: &[f64], k: usize| -> (f64, f64) {
        let lo = if k > 0 {
            s[k - 1] + tau0
        } else {
            match boundary {
                Boundary::Periodic { period } if n > 1 => s[n - 1] - period + tau0,
                Boundary::Bounded { lower, .. } => lower,
                _ => f64::NEG_INFINITY,
            }
        };
        let hi = if k + 1 < n {
            s[k + 1] - tau0
        } else {
            match boundary {
                Boundary::Periodic { period } if n > 1 => s[0] + period - tau0,
                Boundary::Bounded { upper, .. } => upper,
                _ => f64::INFINITY,
            }
        };
        (lo, hi)
    };
    for _ in 0..sweeps {
        for parity in [0, 1] {
            for k in (parity..n).step_by(2) {
                let (lo, hi) = bounds(&s, k);
                if lo > hi {
                    return Err(Error::InvariantViolation(format!(
                        "empty truncation interval ({lo}, {hi}) for spike {k}"
                    )));
                }
                s[k] = truncated_normal(nominal[k], sigma, lo, hi, rng);
            }
        }
    }
    Ok(s)
}

/// Exact sampler of `N(mean, sigma²)` restricted to `[lo, hi]`.
pub fn truncated_normal<R: Rng + ?Sized>(
    mean: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> f64 {
    if sigma == 0.0 || lo >= hi {
        return mean.clamp(lo, hi);
    }
    let a = (lo - mean) / sigma;
    let b = (hi - mean) / sigma;
    mean + sigma * standard_truncated(a, b, rng)
}

fn standard_truncated<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b <= 0.0 {
        return -standard_truncated(-b, -a, rng);
    }
    let width = b - a;
    if a < 0.0 && width >= 0.5 {
        // plain rejection; the interval holds 0 and is wide enough to keep acceptance high
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z >= a && z <= b {
                return z;
            }
        }
    }
    if a < 0.0 || width * a.max(1.0) < 1.0 {
        // uniform proposal weighted by the density relative to its maximum on [a, b]
        let m = a.max(0.0);
        loop {
            let z = rng.random_range(a..=b);
            let u: f64 = rng.random();
            if u <= (0.5 * (m * m - z * z)).exp() {
                return z;
            }
        }
    }
    // tail interval [a, b] with a ≥ 0: translated-exponential proposal
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    let exp = Exp::new(alpha).expect("positive rate");
    loop {
        let z = a + exp.sample(rng);
        if z > b {
            continue;
        }
        let u: f64 = rng.random();
        if u <= (-0.5 * (z - alpha) * (z - alpha)).exp() {
            return z;
        }
    }
}
