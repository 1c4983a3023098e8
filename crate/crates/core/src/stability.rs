//! Small-jitter linearization of the periodic firing pattern.
//!
//! Timing errors propagate as `Δ_n ≈ Σ_{n'=1..N} a_{n,n'} Δ_{n−n'}` over the
//! global firing order. One period of the companion recursion gives the
//! monodromy matrix `Φ_N`, whose eigenvalue 1 (uniform shift) must dominate
//! all others for the pattern to absorb small jitter.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{kernel_h_dot, Network};
use crate::score::SpikeScore;

/// All prescribed firings of one period in a single sorted sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFiringOrder {
    pub period: f64,
    pub times: Vec<f64>,
    /// Neuron producing each firing.
    pub owners: Vec<usize>,
}

impl GlobalFiringOrder {
    /// Merges the trains of `score`; simultaneous firings are ordered by neuron index.
    pub fn new(score: &SpikeScore) -> Self {
        let mut all: Vec<(f64, usize)> = score
            .trains
            .iter()
            .enumerate()
            .flat_map(|(l, tr)| tr.times.iter().map(move |&t| (t, l)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        GlobalFiringOrder {
            period: score.period,
            times: all.iter().map(|p| p.0).collect(),
            owners: all.iter().map(|p| p.1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time of the firing `lag` positions before firing `n` (`1 ≤ lag ≤ N`),
    /// following the periodic extension.
    pub fn predecessor(&self, n: usize, lag: usize) -> (usize, f64) {
        let nn = self.len() as i64;
        let j = n as i64 - lag as i64;
        let m = j.rem_euclid(nn);
        let wraps = (j - m) / nn;
        (m as usize, self.times[m as usize] + wraps as f64 * self.period)
    }
}

/// Coefficients `a_{n,n'}` of one period (`rows[n][n' − 1]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterMatrixSeq {
    pub order: GlobalFiringOrder,
    pub rows: Vec<Vec<f64>>,
    /// Unnormalized slope `Σ_{n'} ż_{n,n'}(s̆_n)` of each firing.
    pub slopes: Vec<f64>,
}

impl JitterMatrixSeq {
    /// Firings whose total slope is not positive.
    pub fn degenerate(&self) -> Vec<usize> {
        (0..self.slopes.len()).filter(|&n| !(self.slopes[n] > 0.0)).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Companion matrix `A_n`: coefficient row on top, shifted identity below.
    pub fn companion(&self, n: usize) -> DMatrix<f64> {
        let nn = self.len();
        let mut a = DMatrix::zeros(nn, nn);
        for (j, &v) in self.rows[n].iter().enumerate() {
            a[(0, j)] = v;
        }
        for i in 1..nn {
            a[(i, i - 1)] = 1.0;
        }
        a
    }
}

/// Linearized jitter propagation of the score as produced by `net`.
///
/// Contributions of firings more than `N` positions back are neglected.
/// Fails with [`Error::DegenerateFiring`] where the total slope is not positive.
pub fn jitter_coefficients(net: &Network, score: &SpikeScore) -> Result<JitterMatrixSeq> {
    let seq = jitter_coefficients_lenient(net, score)?;
    match seq.degenerate().first() {
        Some(&n) => Err(Error::DegenerateFiring {
            index: n,
            slope: seq.slopes[n],
        }),
        None => Ok(seq),
    }
}

/// Like [`jitter_coefficients`], but firings with a negative total slope are
/// normalized anyway (see [`JitterMatrixSeq::degenerate`]). Only an exactly
/// zero slope is an error.
pub fn jitter_coefficients_lenient(net: &Network, score: &SpikeScore) -> Result<JitterMatrixSeq> {
    if score.num_neurons() != net.num_neurons {
        return Err(Error::param("score size differs from network size"));
    }
    let order = GlobalFiringOrder::new(score);
    let nn = order.len();
    if nn == 0 {
        return Err(Error::param("the score has no firings"));
    }
    // global indices of each neuron's firings
    let mut by_neuron: Vec<Vec<usize>> = vec![Vec::new(); net.num_neurons];
    for (g, &l) in order.owners.iter().enumerate() {
        by_neuron[l].push(g);
    }
    let beta = net.beta;
    let mut rows = Vec::with_capacity(nn);
    let mut slopes = Vec::with_capacity(nn);
    for n in 0..nn {
        let s_n = order.times[n];
        let mut row = vec![0.0; nn];
        for syn in &net.neurons[order.owners[n]].synapses {
            if syn.weight == 0.0 {
                continue;
            }
            for &m in &by_neuron[syn.source] {
                // the unique lag in 1..=N at which firing m precedes n
                let lag = if m < n { n - m } else { n + nn - m };
                let (_, t_m) = order.predecessor(n, lag);
                row[lag - 1] += syn.weight * kernel_h_dot(s_n - syn.delay - t_m, beta);
            }
        }
        let total: f64 = row.iter().sum();
        if total == 0.0 || !total.is_finite() {
            return Err(Error::DegenerateFiring { index: n, slope: total });
        }
        row.iter_mut().for_each(|v| *v /= total);
        rows.push(row);
        slopes.push(total);
    }
    Ok(JitterMatrixSeq { order, rows, slopes })
}

/// `Φ_N = A_{N−1} ⋯ A_1 A_0`, built row by row: each `A_n` prepends one
/// combination of the current rows and drops the last one.
pub fn monodromy(seq: &JitterMatrixSeq) -> DMatrix<f64> {
    let nn = seq.len();
    let mut rows: VecDeque<Vec<f64>> = (0..nn)
        .map(|i| {
            let mut r = vec![0.0; nn];
            r[i] = 1.0;
            r
        })
        .collect();
    for a in &seq.rows {
        let mut top = vec![0.0; nn];
        for (coef, row) in a.iter().zip(rows.iter()) {
            if *coef == 0.0 {
                continue;
            }
            for (t, v) in top.iter_mut().zip(row) {
                *t += coef * v;
            }
        }
        rows.pop_back();
        rows.push_front(top);
    }
    DMatrix::from_fn(nn, nn, |i, j| rows[i][j])
}

/// Moduli of all eigenvalues, sorted in decreasing order.
pub fn eigenvalue_moduli(phi: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !phi.is_square() || phi.nrows() == 0 {
        return Err(Error::param("eigenvalues need a non-empty square matrix"));
    }
    let schur = nalgebra::linalg::Schur::try_new(phi.clone(), f64::EPSILON, 100 * phi.nrows().max(10))
        .ok_or_else(|| Error::SolverLimit("Schur iteration did not converge".into()))?;
    let mut mods: Vec<f64> = schur.complex_eigenvalues().iter().map(|c| c.norm()).collect();
    mods.sort_by(|a, b| b.total_cmp(a));
    Ok(mods)
}

/// The two largest eigenvalue moduli `(|φ1|, |φ2|)`; `|φ2| = 0` for a 1×1 matrix.
pub fn leading_eigenvalues(phi: &DMatrix<f64>) -> Result<(f64, f64)> {
    let mods = eigenvalue_moduli(phi)?;
    Ok((mods[0], mods.get(1).copied().unwrap_or(0.0)))
}

/// Largest deviation of `Φ·1` from `1`.
pub fn ones_residual(phi: &DMatrix<f64>) -> f64 {
    phi.row_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Tolerance on `|φ1| = 1`, relative.
pub const PHI1_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Firings per period.
    pub n: usize,
    /// Firings with a non-positive total slope (normalized anyway).
    pub degenerate: usize,
    pub phi1: f64,
    pub phi2: f64,
    pub ones_residual: f64,
}

impl StabilityReport {
    pub fn log10_phi1(&self) -> f64 {
        self.phi1.log10()
    }

    pub fn log10_phi2(&self) -> f64 {
        self.phi2.log10()
    }

    /// `|φ1| = 1` and `|φ2| < 1`, with every firing non-degenerate.
    pub fn stable(&self) -> bool {
        self.degenerate == 0 && (self.phi1 - 1.0).abs() <= PHI1_TOL && self.phi2 < 1.0
    }
}

/// Full pipeline: coefficients, monodromy and its two leading eigenvalues.
/// Fails on degenerate firings unless `lenient`.
pub fn analyze(net: &Network, score: &SpikeScore, lenient: bool) -> Result<StabilityReport> {
    let seq = if lenient {
        jitter_coefficients_lenient(net, score)?
    } else {
        jitter_coefficients(net, score)?
    };
    let phi = monodromy(&seq);
    let (phi1, phi2) = leading_eigenvalues(&phi)?;
    Ok(StabilityReport {
        n: seq.len(),
        degenerate: seq.degenerate().len(),
        phi1,
        phi2,
        ones_residual: ones_residual(&phi),
    })
}

/// CSV with header `instance,N,log10_phi1,log10_phi2,pass`.
pub fn reports_to_csv(rows: &[(String, StabilityReport)]) -> String {
    let mut out = String::from("instance,N,log10_phi1,log10_phi2,pass\n");
    for (id, r) in rows {
        let _ = writeln!(
            out,
            "{id},{},{},{},{}",
            r.n,
            r.log10_phi1(),
            r.log10_phi2(),
            r.stable()
        );
    }
    out
}
