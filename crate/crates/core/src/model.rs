//! Network topology, axonal delays, weights and the postsynaptic kernel.

use std::f64::consts::E;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kernel tail level below which `h` is treated as zero.
pub const KERNEL_TAIL: f64 = 1e-10;

/// Postsynaptic pulse `h(t) = (t/β) exp(1 − t/β)` for `t ≥ 0`, zero before.
///
/// The pulse peaks at `t = β` with `h(β) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub beta: f64,
}

impl Kernel {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::param(format!("kernel beta must be positive, got {beta}")));
        }
        Ok(Kernel { beta })
    }

    #[inline]
    pub fn h(&self, t: f64) -> f64 {
        kernel_h(t, self.beta)
    }

    #[inline]
    pub fn h_dot(&self, t: f64) -> f64 {
        kernel_h_dot(t, self.beta)
    }

    /// Time after which `h` stays below [`KERNEL_TAIL`].
    pub fn cutoff(&self) -> f64 {
        self.beta * tail_cutoff_ratio()
    }
}

#[inline]
pub fn kernel_h(t: f64, beta: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else {
        let x = t / beta;
        x * (1.0 - x).exp()
    }
}

/// Derivative of [`kernel_h`]; the right derivative `e/β` is returned at `t = 0`.
#[inline]
pub fn kernel_h_dot(t: f64, beta: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else {
        let x = t / beta;
        (1.0 - x) * (1.0 - x).exp() / beta
    }
}

/// Solves `x exp(1 − x) = KERNEL_TAIL` for `x > 1` (≈ 27.3).
fn tail_cutoff_ratio() -> f64 {
    // Newton on g(x) = ln x + 1 − x − ln(tail), convex and decreasing for x > 1
    let target = KERNEL_TAIL.ln();
    let mut x: f64 = 30.0;
    for _ in 0..50 {
        let g = x.ln() + 1.0 - x - target;
        let dg = 1.0 / x - 1.0;
        let step = g / dg;
        x -= step;
        if step.abs() < 1e-14 * x {
            break;
        }
    }
    x
}

/// Exact superposition of kernels between arrivals.
///
/// `z(t) = (a + b (t − t_ref)) exp(−(t − t_ref)/β)`; a single arrival of weight
/// `w` at `t_ref` is `a = 0, b = w e / β`, and sums of such pulses stay in this
/// two-parameter family once rebased to a common reference time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelTrace {
    pub t_ref: f64,
    pub a: f64,
    pub b: f64,
}

impl KernelTrace {
    pub fn new(t_ref: f64) -> Self {
        KernelTrace {
            t_ref,
            a: 0.0,
            b: 0.0,
        }
    }

    /// Moves the reference time forward to `t` (no-op if `t == t_ref`).
    #[inline]
    pub fn advance_to(&mut self, t: f64, beta: f64) {
        let dt = t - self.t_ref;
        if dt != 0.0 {
            let decay = (-dt / beta).exp();
            self.advance_by(dt, decay);
        }
        self.t_ref = t;
    }

    /// Same as [`advance_to`](Self::advance_to) with a precomputed `exp(−dt/β)`.
    #[inline]
    pub fn advance_by(&mut self, dt: f64, decay: f64) {
        self.a = (self.a + self.b * dt) * decay;
        self.b *= decay;
        self.t_ref += dt;
    }

    /// Adds a pulse of weight `w` starting at the current reference time.
    #[inline]
    pub fn add_pulse(&mut self, w: f64, beta: f64) {
        self.b += w * E / beta;
    }

    #[inline]
    pub fn value_at(&self, t: f64, beta: f64) -> f64 {
        let tau = t - self.t_ref;
        (self.a + self.b * tau) * (-tau / beta).exp()
    }

    #[inline]
    pub fn slope_at(&self, t: f64, beta: f64) -> f64 {
        let tau = t - self.t_ref;
        (self.b - (self.a + self.b * tau) / beta) * (-tau / beta).exp()
    }

    /// Value at the reference time.
    #[inline]
    pub fn value(&self) -> f64 {
        self.a
    }

    /// Slope at the reference time.
    #[inline]
    pub fn slope(&self, beta: f64) -> f64 {
        self.b - self.a / beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Synapse {
    #[serde(rename = "src")]
    pub source: usize,
    pub delay: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Neuron {
    pub synapses: Vec<Synapse>,
}

impl Neuron {
    pub fn weights(&self) -> Vec<f64> {
        self.synapses.iter().map(|s| s.weight).collect()
    }

    pub fn set_weights(&mut self, weights: &[f64]) {
        assert_eq!(weights.len(), self.synapses.len(), "one weight per synapse");
        for (syn, &w) in self.synapses.iter_mut().zip(weights) {
            syn.weight = w;
        }
    }
}

/// Homogeneous recurrent network: every neuron has `K` synapses and shares
/// `β`, `θ0` and `τ0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    #[serde(rename = "L")]
    pub num_neurons: usize,
    #[serde(rename = "K")]
    pub num_inputs: usize,
    pub beta: f64,
    pub theta0: f64,
    pub tau0: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub neurons: Vec<Neuron>,
}

impl Network {
    pub fn kernel(&self) -> Kernel {
        Kernel { beta: self.beta }
    }

    pub fn validate(&self) -> Result<()> {
        if self.neurons.len() != self.num_neurons {
            return Err(Error::InvariantViolation(format!(
                "network declares {} neurons but has {}",
                self.num_neurons,
                self.neurons.len()
            )));
        }
        if !(self.theta0 > 0.0 && self.tau0 > 0.0 && self.beta > 0.0) {
            return Err(Error::InvariantViolation(
                "theta0, tau0 and beta must be positive".into(),
            ));
        }
        for (l, neuron) in self.neurons.iter().enumerate() {
            if neuron.synapses.len() != self.num_inputs {
                return Err(Error::InvariantViolation(format!(
                    "neuron {l} has {} synapses, expected {}",
                    neuron.synapses.len(),
                    self.num_inputs
                )));
            }
            for syn in &neuron.synapses {
                if syn.source >= self.num_neurons {
                    return Err(Error::InvariantViolation(format!(
                        "neuron {l} has a synapse from unknown neuron {}",
                        syn.source
                    )));
                }
                if syn.delay < self.d_min || syn.delay > self.d_max {
                    return Err(Error::InvariantViolation(format!(
                        "neuron {l} has delay {} outside [{}, {}]",
                        syn.delay, self.d_min, self.d_max
                    )));
                }
            }
        }
        Ok(())
    }

    /// Outgoing synapses of every neuron as `(target, delay, weight)`, sorted by delay.
    pub fn fanout(&self) -> Vec<Vec<(usize, f64, f64)>> {
        let mut out = vec![Vec::new(); self.num_neurons];
        for (target, neuron) in self.neurons.iter().enumerate() {
            for syn in &neuron.synapses {
                out[syn.source].push((target, syn.delay, syn.weight));
            }
        }
        for list in &mut out {
            list.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: Network = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }
}

/// Parameters of [`build_random_network`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopologyParams {
    pub num_neurons: usize,
    pub num_inputs: usize,
    pub d_min: f64,
    pub d_max: f64,
    pub beta: f64,
    pub theta0: f64,
    pub tau0: f64,
}

impl Default for TopologyParams {
    fn default() -> Self {
        TopologyParams {
            num_neurons: 200,
            num_inputs: 500,
            d_min: 0.1,
            d_max: 10.0,
            beta: 1.0,
            theta0: 1.0,
            tau0: 1.0,
        }
    }
}

/// Draws sources uniformly over all neurons (self and parallel connections
/// allowed) and delays uniformly on `[d_min, d_max]`; weights start at zero.
pub fn build_random_network<R: Rng + ?Sized>(p: &TopologyParams, rng: &mut R) -> Result<Network> {
    if p.num_neurons == 0 || p.num_inputs == 0 {
        return Err(Error::param("need at least one neuron and one input"));
    }
    if !(p.d_min > 0.0 && p.d_max > p.d_min) {
        return Err(Error::param(format!(
            "need 0 < d_min < d_max, got [{}, {}]",
            p.d_min, p.d_max
        )));
    }
    if !(p.beta > 0.0 && p.theta0 > 0.0 && p.tau0 > 0.0) {
        return Err(Error::param("beta, theta0 and tau0 must be positive"));
    }
    let neurons = (0..p.num_neurons)
        .map(|_| Neuron {
            synapses: (0..p.num_inputs)
                .map(|_| Synapse {
                    source: rng.random_range(0..p.num_neurons),
                    delay: rng.random_range(p.d_min..=p.d_max),
                    weight: 0.0,
                })
                .collect(),
        })
        .collect();
    Ok(Network {
        num_neurons: p.num_neurons,
        num_inputs: p.num_inputs,
        beta: p.beta,
        theta0: p.theta0,
        tau0: p.tau0,
        d_min: p.d_min,
        d_max: p.d_max,
        neurons,
    })
}

/// Potential of `neuron` at `t` given the firing times of every neuron.
///
/// Only spikes with `s + d_k ≤ t` contribute, so spikes after `t` never matter.
pub fn potential(neuron: &Neuron, kernel: &Kernel, firings: &[Vec<f64>], t: f64) -> f64 {
    neuron
        .synapses
        .iter()
        .map(|syn| {
            syn.weight
                * firings[syn.source]
                    .iter()
                    .map(|&s| kernel.h(t - syn.delay - s))
                    .sum::<f64>()
        })
        .sum()
}

/// Time derivative of [`potential`].
pub fn potential_dot(neuron: &Neuron, kernel: &Kernel, firings: &[Vec<f64>], t: f64) -> f64 {
    neuron
        .synapses
        .iter()
        .map(|syn| {
            syn.weight
                * firings[syn.source]
                    .iter()
                    .map(|&s| kernel.h_dot(t - syn.delay - s))
                    .sum::<f64>()
        })
        .sum()
}
