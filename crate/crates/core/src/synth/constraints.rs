//! Discretized template rows for one neuron.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{KernelTrace, Network};
use crate::score::SpikeScore;

use super::TemplateParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    /// `z(s) ≥ θ0` at a prescribed firing.
    Firing,
    /// `z(t) < θ0` just before a prescribed firing.
    Zone,
    /// `z(t) < θr` away from firings.
    Silence,
    /// `ż(t) > θ̇s` around a prescribed firing.
    Slope,
    /// `z(s − δ) ≤ θ0` a hair before a prescribed firing.
    Pin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    /// `g·w ≥ rhs`
    Ge,
    /// `g·w ≤ rhs`
    Le,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowSpec {
    pub kind: RowKind,
    /// Time in `[0, T)` of the memory the row belongs to.
    pub time: f64,
    pub memory: usize,
    pub sense: Sense,
    pub rhs: f64,
    /// Index of this row on the silence grid (consecutive grid points are adjacent).
    pub grid: Option<usize>,
}

impl RowSpec {
    fn uses_slope(&self) -> bool {
        self.kind == RowKind::Slope
    }

    /// Signed slack of `value = g·w`; negative when violated.
    pub fn slack(&self, value: f64) -> f64 {
        match self.sense {
            Sense::Ge => value - self.rhs,
            Sense::Le => self.rhs - value,
        }
    }
}

/// Inputs of one neuron under one prescribed memory.
#[derive(Debug, Clone)]
pub(crate) struct MemoryInputs {
    pub period: f64,
    pub firings: Vec<f64>,
    /// Arrival times per synapse (periodic images, sorted).
    pub arrivals: Vec<Vec<f64>>,
}

/// Linear rows `g·w (≥|≤) rhs` in the neuron's `K` weights, together with the
/// data needed to add rows at arbitrary times later.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub neuron: usize,
    pub rows: Vec<RowSpec>,
    /// Coefficients, one row per [`RowSpec`], one column per synapse.
    pub coeffs: DMatrix<f64>,
    pub weight_bound: f64,
    pub(crate) beta: f64,
    pub(crate) theta0: f64,
    pub(crate) tau0: f64,
    pub(crate) memories: Vec<MemoryInputs>,
}

impl ConstraintSystem {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_weights(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn count(&self, kind: RowKind) -> usize {
        self.rows.iter().filter(|r| r.kind == kind).count()
    }

    /// Row values `g·w` for every row.
    pub fn values(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.coeffs * w
    }

    /// Smallest slack over all rows (negative when some row is violated).
    pub fn worst_slack(&self, w: &DVector<f64>) -> f64 {
        let v = self.values(w);
        self.rows
            .iter()
            .zip(v.iter())
            .map(|(r, &x)| r.slack(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Appends rows at arbitrary times and fills their coefficients.
    pub(crate) fn push_rows(&mut self, specs: &[RowSpec]) {
        if specs.is_empty() {
            return;
        }
        let new = row_coefficients(self.beta, &self.memories, specs);
        let old = self.coeffs.nrows();
        let k = self.coeffs.ncols();
        let mut grown = DMatrix::zeros(old + specs.len(), k);
        grown.rows_mut(0, old).copy_from(&self.coeffs);
        grown.rows_mut(old, specs.len()).copy_from(&new);
        self.coeffs = grown;
        self.rows.extend_from_slice(specs);
    }

    /// Writes the system as text: a header line `rows cols nnz`, then one
    /// `row col coeff` triplet per nonzero (0-based), then one line per row
    /// `row sense rhs kind time memory`, then the weight bound.
    pub fn write_sparse<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let nnz = self.coeffs.iter().filter(|v| **v != 0.0).count();
        writeln!(out, "{} {} {}", self.coeffs.nrows(), self.coeffs.ncols(), nnz)?;
        for j in 0..self.coeffs.ncols() {
            for i in 0..self.coeffs.nrows() {
                let v = self.coeffs[(i, j)];
                if v != 0.0 {
                    writeln!(out, "{i} {j} {v:e}")?;
                }
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            let sense = match r.sense {
                Sense::Ge => ">=",
                Sense::Le => "<=",
            };
            let kind = serde_json::to_value(r.kind).ok();
            let kind = kind.as_ref().and_then(|v| v.as_str()).unwrap_or("?");
            writeln!(out, "{i} {sense} {:e} {kind} {} {}", r.rhs, r.time, r.memory)?;
        }
        writeln!(out, "bound {:e}", self.weight_bound)
    }
}

/// Periodic arrival times of every synapse of `neuron` for one score.
pub(crate) fn memory_inputs(net: &Network, neuron: usize, score: &SpikeScore) -> MemoryInputs {
    let from = -net.d_max - net.kernel().cutoff() - net.beta;
    let arrivals = net.neurons[neuron]
        .synapses
        .iter()
        .map(|syn| {
            score.trains[syn.source]
                .images_in(from - syn.delay, score.period)
                .into_iter()
                .map(|s| s + syn.delay)
                .collect()
        })
        .collect();
    MemoryInputs {
        period: score.period,
        firings: score.trains[neuron].times.clone(),
        arrivals,
    }
}

/// Coefficients of `z(t)` (or `ż(t)` for slope rows) per synapse at each row time.
pub(crate) fn row_coefficients(beta: f64, memories: &[MemoryInputs], specs: &[RowSpec]) -> DMatrix<f64> {
    let k = memories.first().map_or(0, |m| m.arrivals.len());
    let mut out = DMatrix::zeros(specs.len(), k);
    for (mi, mem) in memories.iter().enumerate() {
        let mut order: Vec<usize> = (0..specs.len()).filter(|&i| specs[i].memory == mi).collect();
        if order.is_empty() {
            continue;
        }
        order.sort_by(|&a, &b| specs[a].time.total_cmp(&specs[b].time));
        for (j, arr) in mem.arrivals.iter().enumerate() {
            let mut col = out.column_mut(j);
            let Some(&first) = arr.first() else {
                continue;
            };
            let mut tr = KernelTrace::new(first);
            let mut next = 0;
            for &i in &order {
                let t = specs[i].time;
                while next < arr.len() && arr[next] <= t {
                    tr.advance_to(arr[next], beta);
                    tr.add_pulse(1.0, beta);
                    next += 1;
                }
                if t < tr.t_ref {
                    continue;
                }
                tr.advance_to(t, beta);
                col[i] = if specs[i].uses_slope() {
                    tr.slope(beta)
                } else {
                    tr.value()
                };
            }
        }
    }
    out
}

/// Signed circular offset `t − s` wrapped into `[−T/2, T/2)`.
pub(crate) fn circular_offset(t: f64, s: f64, period: f64) -> f64 {
    (t - s + 0.5 * period).rem_euclid(period) - 0.5 * period
}

/// Template rows for `neuron` under every memory in `scores`.
///
/// Zone, slope and silence rows sit on the global grid `iΔt` of each period.
/// Every prescribed firing `s` additionally gets exact rows at `s` (firing and
/// slope), silence rows at `s − ε_s` and `s + τ0` when those are silent, and,
/// if enabled, a pin row `z(s − δ) ≤ θ0`. With `θ̇_s = 0` neither slope nor
/// pin rows are emitted.
pub fn build_constraints(
    net: &Network,
    neuron: usize,
    scores: &[&SpikeScore],
    params: &TemplateParams,
) -> Result<ConstraintSystem> {
    params.validate(net)?;
    if neuron >= net.num_neurons {
        return Err(Error::param(format!("neuron {neuron} out of range")));
    }
    if scores.is_empty() {
        return Err(Error::param("need at least one score"));
    }
    for sc in scores {
        if sc.num_neurons() != net.num_neurons {
            return Err(Error::param("score size differs from network size"));
        }
        if (sc.tau0 - net.tau0).abs() > 1e-12 {
            return Err(Error::param("score and network disagree on the refractory time"));
        }
    }
    let theta0 = net.theta0;
    let tau0 = net.tau0;
    let mu = params.margin * theta0;
    let dt = params.dt;
    let eps = params.eps_s;
    let slope_rhs = params.theta_dot_s + mu / tau0;
    // θ̇_s = 0 drops the slope condition altogether, and the pin with it
    let with_slope = params.theta_dot_s > 0.0;
    let mut specs = Vec::new();
    let memories: Vec<MemoryInputs> = scores.iter().map(|sc| memory_inputs(net, neuron, sc)).collect();
    let row = |kind, time, memory, sense, rhs, grid| RowSpec {
        kind,
        time,
        memory,
        sense,
        rhs,
        grid,
    };
    for (mi, sc) in scores.iter().enumerate() {
        let period = sc.period;
        let firings = &sc.trains[neuron].times;
        for &s in firings {
            specs.push(row(RowKind::Firing, s, mi, Sense::Ge, theta0, None));
            if with_slope {
                specs.push(row(RowKind::Slope, s, mi, Sense::Ge, slope_rhs, None));
            }
            if with_slope && params.pin_offset > 0.0 {
                let t = (s - params.pin_offset).rem_euclid(period);
                specs.push(row(RowKind::Pin, t, mi, Sense::Le, theta0, None));
            }
        }
        let silence_rhs = if firings.is_empty() {
            params.theta_r
        } else {
            params.theta_r - mu
        };
        // closed ends of the silent stretches, unless another firing covers them
        for (n, &s) in firings.iter().enumerate() {
            for t in [(s - eps).rem_euclid(period), (s + tau0).rem_euclid(period)] {
                let covered = firings.iter().enumerate().any(|(m, &o)| {
                    let d = circular_offset(t, o, period);
                    m != n && d > -eps && d < tau0
                });
                if !covered {
                    specs.push(row(RowKind::Silence, t, mi, Sense::Le, silence_rhs, None));
                }
            }
        }
        let n_grid = (period / dt).ceil() as usize;
        for i in 0..n_grid {
            let t = i as f64 * dt;
            if t >= period {
                break;
            }
            let (mut zone, mut slope, mut excluded) = (false, false, false);
            for &s in firings {
                let d = circular_offset(t, s, period);
                zone |= d > -eps && d < 0.0;
                slope |= d > -eps && d < eps && d != 0.0;
                excluded |= d > -eps && d < tau0;
            }
            if zone {
                specs.push(row(RowKind::Zone, t, mi, Sense::Le, theta0 - mu, Some(i)));
            }
            if slope && with_slope {
                specs.push(row(RowKind::Slope, t, mi, Sense::Ge, slope_rhs, Some(i)));
            }
            if !excluded {
                specs.push(row(RowKind::Silence, t, mi, Sense::Le, silence_rhs, Some(i)));
            }
        }
    }
    let coeffs = row_coefficients(net.beta, &memories, &specs);
    Ok(ConstraintSystem {
        neuron,
        rows: specs,
        coeffs,
        weight_bound: params.w_b,
        beta: net.beta,
        theta0,
        tau0,
        memories,
    })
}
