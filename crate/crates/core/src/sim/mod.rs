//! Event-driven simulation of the network with per-firing threshold noise.
//!
//! Each neuron keeps its potential as a [`KernelTrace`], so arrivals are
//! applied exactly and the next threshold crossing is located analytically
//! between arrivals. Pending firings are invalidated lazily through a
//! per-neuron version counter.

mod crossing;

pub use crossing::{find_next_crossing, CROSSING_TOL};

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{KernelTrace, Network};
use crate::score::{gibbs_jitter, Boundary, SpikeScore};

/// How the network is started at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// Empty history, zero potentials.
    Quiet,
    /// Prescribed firings of the initial score on `(−d_max − t_cut, 0)`.
    ExactScore,
    /// Explicit past firings per neuron (all times `< 0`).
    History(Vec<Vec<f64>>),
}

/// One interval of the forcing schedule. `target` indexes
/// [`Forcing::memories`]; `None` leaves the forced set autonomous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub start: f64,
    pub end: f64,
    pub target: Option<usize>,
}

/// Neurons that ignore their input and replay a jittered memorized train.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    pub neurons: Vec<usize>,
    pub memories: Vec<SpikeScore>,
    /// Contiguous, increasing phases.
    pub schedule: Vec<Phase>,
    pub sigma_s: f64,
    pub sweeps: usize,
}

impl Forcing {
    /// Consecutive phases of length `period` starting at 0, one per entry of `targets`.
    pub fn periodic_phases(period: f64, targets: &[Option<usize>]) -> Vec<Phase> {
        targets
            .iter()
            .enumerate()
            .map(|(i, &target)| Phase {
                start: i as f64 * period,
                end: (i + 1) as f64 * period,
                target,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub horizon: f64,
    pub sigma_theta: f64,
    pub init: InitMode,
    pub forcing: Option<Forcing>,
}

impl SimConfig {
    pub fn new(horizon: f64, sigma_theta: f64, init: InitMode) -> Self {
        SimConfig {
            horizon,
            sigma_theta,
            init,
            forcing: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Autonomous,
    Forced,
}

impl Mode {
    fn label(self) -> &'static str {
        match self {
            Mode::Autonomous => "autonomous",
            Mode::Forced => "forced",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Firing {
    pub time: f64,
    /// Threshold in effect at an autonomous firing; `None` when forced.
    pub threshold: Option<f64>,
    pub mode: Mode,
}

/// Realized firings on `[0, horizon)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRun {
    pub horizon: f64,
    pub tau0: f64,
    pub firings: Vec<Vec<Firing>>,
    pub phases: Vec<Phase>,
}

impl SimRun {
    pub fn num_neurons(&self) -> usize {
        self.firings.len()
    }

    pub fn times(&self, neuron: usize) -> Vec<f64> {
        self.firings[neuron].iter().map(|f| f.time).collect()
    }

    pub fn spike_times(&self) -> Vec<Vec<f64>> {
        (0..self.firings.len()).map(|l| self.times(l)).collect()
    }

    pub fn total_firings(&self) -> usize {
        self.firings.iter().map(Vec::len).sum()
    }

    /// Checks that every neuron's consecutive firings are at least `tau0` apart.
    pub fn check_refractory(&self) -> Result<()> {
        for (l, fs) in self.firings.iter().enumerate() {
            for w in fs.windows(2) {
                if w[1].time - w[0].time < self.tau0 {
                    return Err(Error::InvariantViolation(format!(
                        "neuron {l} fired at {} and {} (gap below {})",
                        w[0].time, w[1].time, self.tau0
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rows `neuron,time,threshold,mode`, ordered by neuron then time.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("neuron,time,threshold,mode\n");
        for (l, fs) in self.firings.iter().enumerate() {
            for f in fs {
                let th = f.threshold.map(|x| x.to_string()).unwrap_or_default();
                let _ = writeln!(out, "{l},{},{th},{}", f.time, f.mode.label());
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Start,
    Phase(usize),
    Fire { neuron: usize, version: u64 },
    Forced { neuron: usize, gen: u64 },
    Fanout { source: usize, emit: f64, cursor: usize },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    class: u8,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed so that BinaryHeap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.class.cmp(&self.class))
            .then(other.seq.cmp(&self.seq))
    }
}

struct Queue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, time: f64, kind: Kind) {
        let class = match kind {
            Kind::Start | Kind::Phase(_) => 0,
            Kind::Fire { .. } | Kind::Forced { .. } => 1,
            Kind::Fanout { .. } => 2,
        };
        self.seq += 1;
        self.heap.push(Event {
            time,
            class,
            seq: self.seq,
            kind,
        });
    }
}

struct Unit {
    trace: KernelTrace,
    last: Option<f64>,
    theta: f64,
    version: u64,
    pending: Option<f64>,
    forced: bool,
    target: Option<usize>,
    gen: u64,
    plan: Vec<f64>,
    cursor: usize,
}

/// Smallest representable time `t ≥ last + tau0` with `t − last ≥ tau0`.
fn refractory_end(last: f64, tau0: f64) -> f64 {
    let mut t = last + tau0;
    while t - last < tau0 {
        t = t.next_up();
    }
    t
}

fn validate_forcing(net: &Network, f: &Forcing) -> Result<()> {
    if let Some(&bad) = f.neurons.iter().find(|&&l| l >= net.num_neurons) {
        return Err(Error::param(format!("forced neuron {bad} out of range")));
    }
    if !(f.sigma_s >= 0.0) || f.sweeps == 0 {
        return Err(Error::param("forcing needs sigma_s ≥ 0 and at least one sweep"));
    }
    for m in &f.memories {
        if m.num_neurons() != net.num_neurons {
            return Err(Error::param("memory size differs from network size"));
        }
    }
    for (i, p) in f.schedule.iter().enumerate() {
        if !(p.end > p.start) {
            return Err(Error::param(format!("phase {i} has end ≤ start")));
        }
        if i > 0 && f.schedule[i - 1].end != p.start {
            return Err(Error::param("forcing phases must be contiguous"));
        }
        if let Some(m) = p.target {
            if m >= f.memories.len() {
                return Err(Error::param(format!("phase {i} targets missing memory {m}")));
            }
        }
    }
    Ok(())
}

/// Runs the network on `[0, config.horizon)`.
///
/// A neuron fires at the earliest `t ≥ last + τ0` with `z(t) ≥ θ`; its
/// threshold is then redrawn from `N(θ0, σθ²)`. The threshold in effect
/// before the first firing is a fresh draw at `t = 0`.
pub fn simulate<R: Rng + ?Sized>(
    net: &Network,
    config: &SimConfig,
    initial_score: Option<&SpikeScore>,
    rng: &mut R,
) -> Result<SimRun> {
    net.validate()?;
    if !(config.horizon > 0.0) {
        return Err(Error::param("simulation horizon must be positive"));
    }
    if !(config.sigma_theta >= 0.0) {
        return Err(Error::param("threshold noise must be ≥ 0"));
    }
    let nl = net.num_neurons;
    let beta = net.beta;
    let tau0 = net.tau0;
    let horizon = config.horizon;
    let threshold = Normal::new(net.theta0, config.sigma_theta)
        .map_err(|e| Error::param(format!("threshold distribution: {e}")))?;

    let history: Vec<Vec<f64>> = match &config.init {
        InitMode::Quiet => vec![Vec::new(); nl],
        InitMode::ExactScore => {
            let score = initial_score
                .ok_or_else(|| Error::param("exact-score initialization needs a score"))?;
            if score.num_neurons() != nl {
                return Err(Error::param("score size differs from network size"));
            }
            let from = -net.d_max - net.kernel().cutoff();
            score.trains.iter().map(|tr| tr.images_in(from, 0.0)).collect()
        }
        InitMode::History(h) => {
            if h.len() != nl {
                return Err(Error::param("history size differs from network size"));
            }
            let mut h = h.clone();
            for times in &mut h {
                times.sort_by(f64::total_cmp);
                if times.last().is_some_and(|&t| !(t < 0.0)) {
                    return Err(Error::param("history firings must lie before t = 0"));
                }
            }
            h
        }
    };
    if let Some(f) = &config.forcing {
        validate_forcing(net, f)?;
    }

    let fanout = net.fanout();
    let mut q = Queue {
        heap: BinaryHeap::new(),
        seq: 0,
    };
    let mut units: Vec<Unit> = history
        .iter()
        .map(|h| Unit {
            trace: KernelTrace::new(h.first().copied().unwrap_or(0.0).min(0.0)),
            last: h.last().copied(),
            theta: net.theta0,
            version: 0,
            pending: None,
            forced: false,
            target: None,
            gen: 0,
            plan: Vec::new(),
            cursor: 0,
        })
        .collect();
    for (l, h) in history.iter().enumerate() {
        if fanout[l].is_empty() {
            continue;
        }
        for &s in h {
            q.push(
                s + fanout[l][0].1,
                Kind::Fanout {
                    source: l,
                    emit: s,
                    cursor: 0,
                },
            );
        }
    }
    q.push(0.0, Kind::Start);
    let phases: Vec<Phase> = config
        .forcing
        .as_ref()
        .map(|f| f.schedule.clone())
        .unwrap_or_default();
    for (i, p) in phases.iter().enumerate() {
        q.push(p.start.max(0.0), Kind::Phase(i));
    }
    if let Some(last) = phases.last() {
        q.push(last.end.max(0.0), Kind::Phase(phases.len()));
    }

    let mut firings: Vec<Vec<Firing>> = vec![Vec::new(); nl];
    let mut started = false;
    let mut now = f64::NEG_INFINITY;

    // recomputes the pending autonomous firing of `l` from time `t`
    let reschedule = |u: &mut Unit, l: usize, t: f64, q: &mut Queue| -> Result<()> {
        let from = match u.last {
            Some(last) => refractory_end(last, tau0).max(t),
            None => t,
        };
        let next = if from < horizon {
            find_next_crossing(&u.trace, beta, u.theta, from)
        } else {
            None
        };
        if let Some(tf) = next {
            if !tf.is_finite() || tf < from {
                return Err(Error::Internal(format!(
                    "crossing search for neuron {l} returned {tf} before {from}"
                )));
            }
        }
        let next = next.filter(|&tf| tf < horizon);
        if next != u.pending {
            u.version += 1;
            u.pending = next;
            if let Some(tf) = next {
                q.push(
                    tf,
                    Kind::Fire {
                        neuron: l,
                        version: u.version,
                    },
                );
            }
        }
        Ok(())
    };

    while let Some(ev) = q.heap.pop() {
        if ev.time >= horizon {
            break;
        }
        if ev.time < now {
            return Err(Error::Internal(format!(
                "event queue went back in time: {} after {now}",
                ev.time
            )));
        }
        now = ev.time;
        match ev.kind {
            Kind::Start => {
                started = true;
                for (l, u) in units.iter_mut().enumerate() {
                    u.theta = threshold.sample(rng);
                    if !u.forced {
                        reschedule(u, l, 0.0, &mut q)?;
                    }
                }
            }
            Kind::Phase(i) => {
                let f = config.forcing.as_ref().expect("phases imply forcing");
                let target = phases.get(i).and_then(|p| p.target);
                for &l in &f.neurons {
                    let u = &mut units[l];
                    if u.forced && u.target == target {
                        continue;
                    }
                    u.gen += 1;
                    match target {
                        Some(m) => {
                            // the run lasts while consecutive phases keep this target
                            let mut end = phases[i].end;
                            for p in &phases[i + 1..] {
                                if p.target != Some(m) {
                                    break;
                                }
                                end = p.end;
                            }
                            let lower = match u.last {
                                Some(last) => refractory_end(last, tau0).max(now),
                                None => now,
                            };
                            u.plan = forced_plan(
                                &f.memories[m].trains[l].images_in(phases[i].start, end),
                                lower,
                                end,
                                tau0,
                                f.sigma_s,
                                f.sweeps,
                                rng,
                            )?;
                            u.cursor = 0;
                            u.forced = true;
                            u.target = target;
                            u.version += 1;
                            u.pending = None;
                            if let Some(&t) = u.plan.first() {
                                q.push(t, Kind::Forced { neuron: l, gen: u.gen });
                            }
                        }
                        None => {
                            u.forced = false;
                            u.target = None;
                            u.plan.clear();
                            u.theta = threshold.sample(rng);
                            if started {
                                reschedule(u, l, now, &mut q)?;
                            }
                        }
                    }
                }
            }
            Kind::Fire { neuron, version } => {
                let u = &mut units[neuron];
                if u.version != version || u.forced {
                    continue;
                }
                if let Some(last) = u.last {
                    if now - last < tau0 {
                        return Err(Error::Internal(format!(
                            "neuron {neuron} scheduled inside its refractory period at {now}"
                        )));
                    }
                }
                firings[neuron].push(Firing {
                    time: now,
                    threshold: Some(u.theta),
                    mode: Mode::Autonomous,
                });
                u.last = Some(now);
                u.pending = None;
                u.theta = threshold.sample(rng);
                if let Some(&(_, d, _)) = fanout[neuron].first() {
                    q.push(
                        now + d,
                        Kind::Fanout {
                            source: neuron,
                            emit: now,
                            cursor: 0,
                        },
                    );
                }
                u.trace.advance_to(now, beta);
                reschedule(u, neuron, now, &mut q)?;
            }
            Kind::Forced { neuron, gen } => {
                let u = &mut units[neuron];
                if u.gen != gen || !u.forced {
                    continue;
                }
                firings[neuron].push(Firing {
                    time: now,
                    threshold: None,
                    mode: Mode::Forced,
                });
                u.last = Some(now);
                u.cursor += 1;
                if let Some(&t) = u.plan.get(u.cursor) {
                    q.push(t, Kind::Forced { neuron, gen });
                }
                if let Some(&(_, d, _)) = fanout[neuron].first() {
                    q.push(
                        now + d,
                        Kind::Fanout {
                            source: neuron,
                            emit: now,
                            cursor: 0,
                        },
                    );
                }
            }
            Kind::Fanout {
                source,
                emit,
                cursor,
            } => {
                let list = &fanout[source];
                let (target, _, w) = list[cursor];
                if let Some(&(_, d, _)) = list.get(cursor + 1) {
                    q.push(
                        emit + d,
                        Kind::Fanout {
                            source,
                            emit,
                            cursor: cursor + 1,
                        },
                    );
                }
                let u = &mut units[target];
                u.trace.advance_to(now, beta);
                u.trace.add_pulse(w, beta);
                if started && !u.forced {
                    reschedule(u, target, now, &mut q)?;
                }
            }
        }
    }

    Ok(SimRun {
        horizon,
        tau0,
        firings,
        phases,
    })
}

/// Jittered replay of `nominal` restricted to `[lower, upper]`.
///
/// Leading nominal spikes that cannot be placed after `lower` without
/// breaking the refractory gap to their successor are dropped.
fn forced_plan<R: Rng + ?Sized>(
    nominal: &[f64],
    lower: f64,
    upper: f64,
    tau0: f64,
    sigma: f64,
    sweeps: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut start = 0;
    while start < nominal.len() {
        let s0 = nominal[start];
        let blocked = match nominal.get(start + 1) {
            Some(&s1) => lower > s1 - tau0,
            None => lower > upper,
        };
        if blocked || (sigma == 0.0 && s0 < lower) {
            start += 1;
        } else {
            break;
        }
    }
    let nominal = &nominal[start..];
    if nominal.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = gibbs_jitter(nominal, tau0, sigma, sweeps, Boundary::Bounded { lower, upper }, rng)?;
    out.retain(|&t| t < upper);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Neuron, Synapse};
    use crate::score::SpikeTrain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain(weight: f64) -> Network {
        // 0 → 1 → 0 with delay 1.5 each
        let syn = |src| Synapse {
            source: src,
            delay: 1.5,
            weight,
        };
        Network {
            num_neurons: 2,
            num_inputs: 1,
            beta: 1.0,
            theta0: 1.0,
            tau0: 1.0,
            d_min: 0.1,
            d_max: 10.0,
            neurons: vec![
                Neuron {
                    synapses: vec![syn(1)],
                },
                Neuron {
                    synapses: vec![syn(0)],
                },
            ],
        }
    }

    #[test]
    fn zero_weights_stay_silent() {
        let net = chain(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let run = simulate(&net, &SimConfig::new(100.0, 0.1, InitMode::Quiet), None, &mut rng).unwrap();
        assert_eq!(run.total_firings(), 0);
    }

    #[test]
    fn relay_chain_fires_at_kernel_peaks() {
        // weight equal to the threshold: each arrival peaks exactly at θ0 after β
        let net = chain(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = SimConfig::new(12.0, 0.0, InitMode::History(vec![vec![-0.5], vec![]]));
        let run = simulate(&net, &cfg, None, &mut rng).unwrap();
        // 0 fired at −0.5 → 1 peaks at 2.0 → 0 peaks at 4.5 → …
        let t1 = run.times(1);
        let t0 = run.times(0);
        assert!((t1[0] - 2.0).abs() < 1e-6, "{t1:?}");
        assert!((t0[0] - 4.5).abs() < 1e-6, "{t0:?}");
        // later firings see the tail of earlier pulses, so they cross before the peak
        let mut hist = run.spike_times();
        hist[0].insert(0, -0.5);
        let z = crate::model::potential(&net.neurons[1], &net.kernel(), &hist, t1[1]);
        assert!(t1[1] < 7.0 && (z - 1.0).abs() < 1e-9, "{t1:?} z = {z}");
        run.check_refractory().unwrap();
    }

    #[test]
    fn strong_input_fires_at_refractory_end() {
        // self-loop with large weight: potential stays high, so firing repeats every τ0
        let mut net = chain(50.0);
        net.neurons[0].synapses[0].source = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = SimConfig::new(10.0, 0.0, InitMode::History(vec![vec![-1.0], vec![]]));
        let run = simulate(&net, &cfg, None, &mut rng).unwrap();
        let t = run.times(0);
        assert!(t.len() >= 8);
        for w in t.windows(2) {
            assert!(w[1] - w[0] >= 1.0);
            assert!(w[1] - w[0] < 1.0 + 1e-12);
        }
    }

    #[test]
    fn forced_neurons_replay_their_train() {
        let net = chain(0.0);
        let score = SpikeScore::new(
            1.0,
            10.0,
            vec![SpikeTrain::new(10.0, vec![1.0, 4.0]), SpikeTrain::new(10.0, vec![2.0])],
        )
        .unwrap();
        let forcing = Forcing {
            neurons: vec![0],
            memories: vec![score],
            schedule: Forcing::periodic_phases(10.0, &[Some(0), Some(0), None]),
            sigma_s: 0.0,
            sweeps: 1,
        };
        let mut cfg = SimConfig::new(40.0, 0.0, InitMode::Quiet);
        cfg.forcing = Some(forcing);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let run = simulate(&net, &cfg, None, &mut rng).unwrap();
        assert_eq!(run.times(0), vec![1.0, 4.0, 11.0, 14.0]);
        assert!(run.firings[0].iter().all(|f| f.mode == Mode::Forced));
        assert!(run.times(1).is_empty());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let net = chain(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = SimConfig::new(12.0, 0.05, InitMode::History(vec![vec![-0.5], vec![]]));
        let run = simulate(&net, &cfg, None, &mut rng).unwrap();
        let back = SimRun::from_json(&run.to_json().unwrap()).unwrap();
        assert_eq!(back, run);
        let csv = run.to_csv();
        assert!(csv.starts_with("neuron,time,threshold,mode\n"));
        assert_eq!(csv.lines().count(), 1 + run.total_firings());
    }
}
