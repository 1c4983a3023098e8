//! Weight synthesis: per-neuron linear template on a time grid, solved as a
//! box-constrained QP/LP with lazily added rows.

mod constraints;
pub mod qp;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{KernelTrace, Network};
use crate::score::SpikeScore;
use crate::sim::find_next_crossing;

pub use constraints::{build_constraints, ConstraintSystem, RowKind, RowSpec, Sense};
use constraints::{circular_offset, MemoryInputs};
use qp::{solve_qp, IpmOptions, QpProblem, QpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    /// Minimize `Σ|w_k|`.
    L1,
    /// Minimize `Σ w_k²`.
    L2,
    /// Any feasible point.
    None,
}

impl std::str::FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "l1" => Ok(Regularizer::L1),
            "2" | "l2" => Ok(Regularizer::L2),
            "none" | "-" | "0" => Ok(Regularizer::None),
            other => Err(Error::param(format!("unknown regularizer {other:?}"))),
        }
    }
}

impl std::fmt::Display for Regularizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regularizer::L1 => "1",
            Regularizer::L2 => "2",
            Regularizer::None => "none",
        })
    }
}

/// Template parameters. Times are absolute (same unit as `τ0`), potentials
/// absolute (same unit as `θ0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateParams {
    pub eps_s: f64,
    pub theta_r: f64,
    pub theta_dot_s: f64,
    pub w_b: f64,
    pub nu: Regularizer,
    pub dt: f64,
    /// Margin for strict inequalities, relative to `θ0` (slope rows use `margin·θ0/τ0`).
    pub margin: f64,
    /// Offset of the pin row before each firing; 0 disables it.
    pub pin_offset: f64,
}

impl TemplateParams {
    /// Defaults for `τ0 = θ0 = 1`.
    pub fn defaults(tau0: f64, theta0: f64) -> Self {
        TemplateParams {
            eps_s: 0.2 * tau0,
            theta_r: 0.0,
            theta_dot_s: 2.0 * theta0 / tau0,
            w_b: 0.2 * theta0,
            nu: Regularizer::L2,
            dt: tau0 / 50.0,
            margin: 1e-6,
            pin_offset: 5e-8 * tau0,
        }
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        if !(self.w_b > 0.0 && self.w_b < net.theta0) {
            return Err(Error::param(format!("w_b = {} must lie in (0, θ0)", self.w_b)));
        }
        if !(self.theta_dot_s >= 0.0) {
            return Err(Error::param("θ̇_s must be non-negative"));
        }
        if !(self.theta_r < net.theta0) {
            return Err(Error::param("θ_r must be below θ0"));
        }
        if !(self.eps_s > 0.0 && self.eps_s < net.tau0) {
            return Err(Error::param("ε_s must lie in (0, τ0)"));
        }
        if !(self.dt > 0.0 && self.dt <= self.eps_s) {
            return Err(Error::param("grid step must lie in (0, ε_s]"));
        }
        if !(self.margin >= 0.0 && self.pin_offset >= 0.0 && self.pin_offset < self.eps_s) {
            return Err(Error::param("margin and pin offset must be small and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthesisStatus {
    Feasible,
    Infeasible,
    SolverLimit,
    /// Not attempted because an earlier neuron was infeasible.
    Skipped,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub neuron: usize,
    pub status: SynthesisStatus,
    pub weights: Vec<f64>,
    /// `Σ|w|^ν` (0 for no regularization).
    pub objective: f64,
    /// Smallest slack over every discretized row (negative when violated).
    pub worst_margin: f64,
    /// Smallest slack of the template re-checked on a grid ten times finer.
    pub fine_margin: f64,
    pub total_rows: usize,
    pub active_rows: usize,
    pub rounds: usize,
    pub iterations: usize,
    /// Whether an exact single-neuron run under prescribed inputs reproduces
    /// the prescribed firings (and nothing else) to within the pin offset.
    pub open_loop_ok: bool,
}

impl SynthesisResult {
    fn failed(sys: &ConstraintSystem, status: SynthesisStatus, rounds: usize, iterations: usize) -> Self {
        SynthesisResult {
            neuron: sys.neuron,
            status,
            weights: Vec::new(),
            objective: f64::NAN,
            worst_margin: f64::NAN,
            fine_margin: f64::NAN,
            total_rows: sys.num_rows(),
            active_rows: 0,
            rounds,
            iterations,
            open_loop_ok: false,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status == SynthesisStatus::Feasible
    }

    /// Number of weights with `|w| > tol`.
    pub fn nonzeros(&self, tol: f64) -> usize {
        self.weights.iter().filter(|w| w.abs() > tol).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub ipm: IpmOptions,
    /// Every `silence_stride`-th silence row starts in the active set (0: none).
    pub silence_stride: usize,
    pub max_rounds: usize,
    /// Rows with slack below `-row_tol·θ0` are added to the active set.
    pub row_tol: f64,
    /// Maximum number of open-loop refinement passes.
    pub max_cut_rounds: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            ipm: IpmOptions::default(),
            silence_stride: 0,
            max_rounds: 40,
            row_tol: 1e-9,
            max_cut_rounds: 10,
        }
    }
}

/// Tolerance of the feasibility contract on every discretized row, relative to `θ0`.
pub const MARGIN_TOL: f64 = 1e-8;

fn qp_problem(sys: &ConstraintSystem, active: &[usize], nu: Regularizer) -> QpProblem {
    let k = sys.num_weights();
    let m = active.len();
    let wb = sys.weight_bound;
    let mut b = DVector::zeros(m);
    let sign: Vec<f64> = active
        .iter()
        .map(|&i| match sys.rows[i].sense {
            Sense::Ge => 1.0,
            Sense::Le => -1.0,
        })
        .collect();
    for (r, &i) in active.iter().enumerate() {
        b[r] = sign[r] * sys.rows[i].rhs;
    }
    let g = DMatrix::from_fn(m, k, |r, j| sign[r] * sys.coeffs[(active[r], j)]);
    match nu {
        Regularizer::L1 => {
            // w = u − v with u, v ∈ [0, w_b]
            let mut a = DMatrix::zeros(m, 2 * k);
            a.columns_mut(0, k).copy_from(&g);
            a.columns_mut(k, k).copy_from(&(-&g));
            QpProblem {
                p: DVector::zeros(2 * k),
                c: DVector::from_element(2 * k, 1.0),
                a,
                b,
                lower: DVector::zeros(2 * k),
                upper: DVector::from_element(2 * k, wb),
            }
        }
        Regularizer::L2 | Regularizer::None => QpProblem {
            p: DVector::from_element(k, if nu == Regularizer::L2 { 2.0 } else { 0.0 }),
            c: DVector::zeros(k),
            a: g,
            b,
            lower: DVector::from_element(k, -wb),
            upper: DVector::from_element(k, wb),
        },
    }
}

fn weights_from(x: &DVector<f64>, k: usize, nu: Regularizer) -> DVector<f64> {
    match nu {
        Regularizer::L1 => DVector::from_fn(k, |j, _| x[j] - x[k + j]),
        _ => x.clone(),
    }
}

fn objective_of(w: &DVector<f64>, nu: Regularizer) -> f64 {
    match nu {
        Regularizer::L1 => w.iter().map(|v| v.abs()).sum(),
        Regularizer::L2 => w.norm_squared(),
        Regularizer::None => 0.0,
    }
}

/// Rows to add: within each run of consecutive violated silence grid points
/// only the most violated one, every other violated row individually.
fn violated_rows(sys: &ConstraintSystem, w: &DVector<f64>, in_active: &[bool], tol: f64) -> Vec<usize> {
    let values = sys.values(w);
    let mut out = Vec::new();
    let mut run: Option<(usize, usize, usize, f64)> = None; // (memory, last grid, best row, best slack)
    let mut silence: Vec<usize> = Vec::new();
    for (i, r) in sys.rows.iter().enumerate() {
        if in_active[i] {
            continue;
        }
        let slack = r.slack(values[i]);
        if slack >= -tol {
            continue;
        }
        if r.kind == RowKind::Silence && r.grid.is_some() {
            silence.push(i);
        } else {
            out.push(i);
        }
    }
    silence.sort_by_key(|&i| (sys.rows[i].memory, sys.rows[i].grid));
    for &i in &silence {
        let r = &sys.rows[i];
        let g = r.grid.unwrap_or(0);
        let slack = r.slack(values[i]);
        match run {
            Some((mem, last, best, best_slack)) if mem == r.memory && g == last + 1 => {
                run = Some(if slack < best_slack {
                    (mem, g, i, slack)
                } else {
                    (mem, g, best, best_slack)
                });
            }
            _ => {
                if let Some((_, _, best, _)) = run {
                    out.push(best);
                }
                run = Some((r.memory, g, i, slack));
            }
        }
    }
    if let Some((_, _, best, _)) = run {
        out.push(best);
    }
    out
}

/// Weighted input events `(time, weight)` of one memory, sorted by time.
fn weighted_events(mem: &MemoryInputs, w: &DVector<f64>) -> Vec<(f64, f64)> {
    let mut ev: Vec<(f64, f64)> = mem
        .arrivals
        .iter()
        .enumerate()
        .filter(|(j, _)| w[*j] != 0.0)
        .flat_map(|(j, arr)| arr.iter().map(move |&t| (t, w[j])))
        .collect();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0));
    ev
}

/// Potential sweep over sorted query times; `slope` selects `ż` instead of `z`.
fn sweep(beta: f64, events: &[(f64, f64)], times: &[f64], slope: bool) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut tr = KernelTrace::new(events.first().map_or(0.0, |e| e.0));
    let mut next = 0;
    for &t in times {
        while next < events.len() && events[next].0 <= t {
            tr.advance_to(events[next].0, beta);
            tr.add_pulse(events[next].1, beta);
            next += 1;
        }
        if t < tr.t_ref {
            out.push(0.0);
            continue;
        }
        tr.advance_to(t, beta);
        out.push(if slope { tr.slope(beta) } else { tr.value() });
    }
    out
}

/// Smallest template slack on a grid `dt/10`, over every memory.
fn fine_margin(sys: &ConstraintSystem, w: &DVector<f64>, params: &TemplateParams) -> f64 {
    let mu = params.margin * sys.theta0;
    let step = params.dt / 10.0;
    let mut worst = f64::INFINITY;
    for mem in &sys.memories {
        let period = mem.period;
        let events = weighted_events(mem, w);
        let n = (period / step).ceil() as usize;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * step).filter(|&t| t < period).collect();
        let z = sweep(sys.beta, &events, &times, false);
        let zd = sweep(sys.beta, &events, &times, true);
        let silence_rhs = if mem.firings.is_empty() {
            params.theta_r
        } else {
            params.theta_r - mu
        };
        for (i, &t) in times.iter().enumerate() {
            let (mut zone, mut slope, mut excluded) = (false, false, false);
            for &s in &mem.firings {
                let d = circular_offset(t, s, period);
                zone |= d > -params.eps_s && d < 0.0;
                slope |= d > -params.eps_s && d < params.eps_s;
                excluded |= d > -params.eps_s && d < sys.tau0;
            }
            if zone {
                worst = worst.min(sys.theta0 - mu - z[i]);
            }
            if slope {
                worst = worst.min(zd[i] - params.theta_dot_s - mu / sys.tau0);
            }
            if !excluded {
                worst = worst.min(silence_rhs - z[i]);
            }
        }
    }
    worst
}

/// Exact single-neuron firing under the prescribed inputs of each memory,
/// with threshold `θ0` and absolute refractoriness `τ0`. Returns the first
/// unexpected crossing per memory as `(memory, time)`, or `Missed` entries.
enum OpenLoop {
    Ok,
    Spurious(usize, f64),
    Missed,
}

fn open_loop(sys: &ConstraintSystem, w: &DVector<f64>, params: &TemplateParams) -> OpenLoop {
    let beta = sys.beta;
    let late = 1e-7 * sys.tau0;
    for (mi, mem) in sys.memories.iter().enumerate() {
        let period = mem.period;
        let events = weighted_events(mem, w);
        let firings = &mem.firings;
        let mut tr = KernelTrace::new(events.first().map_or(0.0, |e| e.0.min(0.0)));
        let mut next = 0;
        while next < events.len() && events[next].0 <= 0.0 {
            tr.advance_to(events[next].0, beta);
            tr.add_pulse(events[next].1, beta);
            next += 1;
        }
        tr.advance_to(0.0, beta);
        // the previous period ended with its last prescribed firing
        let mut free_from = firings.last().map_or(0.0, |&s| (s - period + sys.tau0).max(0.0));
        let mut expected = 0;
        loop {
            let seg_end = events.get(next).map_or(period, |e| e.0.min(period));
            if let Some(f) = (free_from < seg_end)
                .then(|| find_next_crossing(&tr, beta, sys.theta0, free_from.max(tr.t_ref)))
                .flatten()
                .filter(|&f| f < seg_end)
            {
                match firings.get(expected) {
                    Some(&s) if f >= s - params.pin_offset - late && f <= s + late => {
                        expected += 1;
                        free_from = s + sys.tau0;
                        continue;
                    }
                    _ => return OpenLoop::Spurious(mi, f),
                }
            }
            if let Some(&s) = firings.get(expected) {
                if s + late < seg_end {
                    return OpenLoop::Missed;
                }
            }
            if seg_end >= period {
                break;
            }
            tr.advance_to(events[next].0, beta);
            tr.add_pulse(events[next].1, beta);
            next += 1;
            if free_from < tr.t_ref {
                free_from = tr.t_ref;
            }
        }
        if expected != firings.len() {
            return OpenLoop::Missed;
        }
    }
    OpenLoop::Ok
}

/// Row to cut off a spurious crossing at `t` of memory `mi`.
fn cut_row(sys: &ConstraintSystem, mi: usize, t: f64, params: &TemplateParams) -> RowSpec {
    let mem = &sys.memories[mi];
    let mu = params.margin * sys.theta0;
    let in_zone = mem.firings.iter().any(|&s| {
        let d = circular_offset(t, s, mem.period);
        d > -params.eps_s && d < 0.0
    });
    let (kind, rhs) = if in_zone {
        (RowKind::Zone, sys.theta0 - mu)
    } else {
        (RowKind::Silence, params.theta_r - mu)
    };
    RowSpec {
        kind,
        time: t,
        memory: mi,
        sense: Sense::Le,
        rhs,
        grid: None,
    }
}

/// Solves one neuron's system by row generation. Rows found violated by the
/// open-loop check are appended to `sys`.
pub fn solve_weights(sys: &mut ConstraintSystem, params: &TemplateParams, opts: &SolveOptions) -> SynthesisResult {
    let k = sys.num_weights();
    let nu = params.nu;
    let tol = opts.row_tol * sys.theta0;
    let mut in_active = vec![false; sys.num_rows()];
    let mut silence_seen = 0usize;
    for (i, r) in sys.rows.iter().enumerate() {
        in_active[i] = if r.kind == RowKind::Silence {
            silence_seen += 1;
            opts.silence_stride > 0 && (silence_seen - 1) % opts.silence_stride == 0
        } else {
            true
        };
    }
    let (mut rounds, mut iterations, mut cuts) = (0, 0, 0);
    loop {
        rounds += 1;
        let active: Vec<usize> = (0..sys.num_rows()).filter(|&i| in_active[i]).collect();
        if active.is_empty() {
            let w = DVector::zeros(k);
            if let Some(res) = finish(sys, params, &w, 0, rounds, iterations, &mut in_active, &mut cuts, opts) {
                return res;
            }
            continue;
        }
        let prob = qp_problem(sys, &active, nu);
        let sol = solve_qp(&prob, &opts.ipm);
        iterations += sol.iterations;
        match sol.status {
            QpStatus::Optimal => {}
            QpStatus::Infeasible => {
                return SynthesisResult::failed(sys, SynthesisStatus::Infeasible, rounds, iterations);
            }
            QpStatus::IterationLimit | QpStatus::NumericalFailure => {
                log::debug!("neuron {}: solver stopped with {:?}", sys.neuron, sol.status);
                return SynthesisResult::failed(sys, SynthesisStatus::SolverLimit, rounds, iterations);
            }
        }
        let w = weights_from(&sol.x, k, nu);
        let add = violated_rows(sys, &w, &in_active, tol);
        if !add.is_empty() {
            if rounds >= opts.max_rounds {
                return SynthesisResult::failed(sys, SynthesisStatus::SolverLimit, rounds, iterations);
            }
            for i in add {
                in_active[i] = true;
            }
            continue;
        }
        if let Some(res) = finish(sys, params, &w, active.len(), rounds, iterations, &mut in_active, &mut cuts, opts) {
            return res;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    sys: &mut ConstraintSystem,
    params: &TemplateParams,
    w: &DVector<f64>,
    active_rows: usize,
    rounds: usize,
    iterations: usize,
    in_active: &mut Vec<bool>,
    cuts: &mut usize,
    opts: &SolveOptions,
) -> Option<SynthesisResult> {
    let worst_margin = sys.worst_slack(w);
    if worst_margin < -MARGIN_TOL * sys.theta0 {
        log::debug!("neuron {}: solution misses rows by {worst_margin:e}", sys.neuron);
        return Some(SynthesisResult::failed(sys, SynthesisStatus::SolverLimit, rounds, iterations));
    }
    let verdict = open_loop(sys, w, params);
    let open_loop_ok = match verdict {
        OpenLoop::Ok => true,
        OpenLoop::Spurious(mi, t) if *cuts < opts.max_cut_rounds && rounds < opts.max_rounds => {
            *cuts += 1;
            let row = cut_row(sys, mi, t, params);
            sys.push_rows(&[row]);
            in_active.push(true);
            return None;
        }
        _ => false,
    };
    Some(SynthesisResult {
        neuron: sys.neuron,
        status: SynthesisStatus::Feasible,
        weights: w.iter().copied().collect(),
        objective: objective_of(w, params.nu),
        worst_margin,
        fine_margin: fine_margin(sys, w, params),
        total_rows: sys.num_rows(),
        active_rows,
        rounds,
        iterations,
        open_loop_ok,
    })
}

/// Builds and solves the system of one neuron.
pub fn synthesize_neuron(
    net: &Network,
    neuron: usize,
    scores: &[&SpikeScore],
    params: &TemplateParams,
    opts: &SolveOptions,
) -> Result<SynthesisResult> {
    let mut sys = build_constraints(net, neuron, scores, params)?;
    Ok(solve_weights(&mut sys, params, opts))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkSynthesis {
    pub results: Vec<SynthesisResult>,
    /// Whether every neuron is feasible (and the weights were updated).
    pub feasible: bool,
}

impl NetworkSynthesis {
    pub fn num_feasible(&self) -> usize {
        self.results.iter().filter(|r| r.is_feasible()).count()
    }

    pub fn worst_margin(&self) -> f64 {
        self.results.iter().map(|r| r.worst_margin).fold(f64::INFINITY, f64::min)
    }
}

/// Synthesizes every neuron independently (in parallel) and writes the
/// weights into `net` only if all neurons are feasible. With `stop_early`,
/// neurons not yet started when an infeasible one is found are skipped.
pub fn synthesize_network(
    net: &mut Network,
    scores: &[&SpikeScore],
    params: &TemplateParams,
    opts: &SolveOptions,
    stop_early: bool,
) -> Result<NetworkSynthesis> {
    params.validate(net)?;
    for sc in scores {
        sc.validate()?;
    }
    let failed = std::sync::atomic::AtomicBool::new(false);
    let frozen: &Network = net;
    let results: Vec<Result<SynthesisResult>> = (0..frozen.num_neurons)
        .into_par_iter()
        .map(|l| {
            if stop_early && failed.load(std::sync::atomic::Ordering::Relaxed) {
                return Ok(SynthesisResult {
                    neuron: l,
                    status: SynthesisStatus::Skipped,
                    weights: Vec::new(),
                    objective: f64::NAN,
                    worst_margin: f64::NAN,
                    fine_margin: f64::NAN,
                    total_rows: 0,
                    active_rows: 0,
                    rounds: 0,
                    iterations: 0,
                    open_loop_ok: false,
                });
            }
            let res = synthesize_neuron(frozen, l, scores, params, opts)?;
            if !res.is_feasible() {
                failed.store(true, std::sync::atomic::Ordering::Relaxed);
            }
            log::debug!("neuron {l}: {:?}, {} rows active", res.status, res.active_rows);
            Ok(res)
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let feasible = results.iter().all(|r| r.is_feasible());
    if feasible {
        for r in &results {
            net.neurons[r.neuron].set_weights(&r.weights);
        }
    }
    Ok(NetworkSynthesis { results, feasible })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Neuron, Synapse};
    use crate::score::SpikeTrain;

    fn bare_system(coeffs: DMatrix<f64>, rows: Vec<RowSpec>, bound: f64) -> ConstraintSystem {
        ConstraintSystem {
            neuron: 0,
            rows,
            coeffs,
            weight_bound: bound,
            beta: 1.0,
            theta0: 1.0,
            tau0: 1.0,
            memories: Vec::new(),
        }
    }

    #[test]
    fn minimum_norm_single_row() {
        let row = RowSpec {
            kind: RowKind::Firing,
            time: 0.0,
            memory: 0,
            sense: Sense::Ge,
            rhs: 1.0,
            grid: None,
        };
        let mut sys = bare_system(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), vec![row], 1.5);
        let params = TemplateParams::defaults(1.0, 1.0);
        let res = solve_weights(&mut sys, &params, &SolveOptions::default());
        assert_eq!(res.status, SynthesisStatus::Feasible);
        assert!((res.weights[0] - 1.0).abs() < 1e-8 && res.weights[1].abs() < 1e-8, "{:?}", res.weights);
        assert!((res.objective - 1.0).abs() < 1e-7);
    }

    #[test]
    fn no_input_cannot_fire() {
        // neuron 0 listens only to neuron 1, which never fires
        let net = Network {
            num_neurons: 2,
            num_inputs: 2,
            beta: 1.0,
            theta0: 1.0,
            tau0: 1.0,
            d_min: 0.5,
            d_max: 2.0,
            neurons: vec![
                Neuron {
                    synapses: vec![
                        Synapse { source: 1, delay: 0.5, weight: 0.0 },
                        Synapse { source: 1, delay: 2.0, weight: 0.0 },
                    ],
                },
                Neuron {
                    synapses: vec![
                        Synapse { source: 0, delay: 0.5, weight: 0.0 },
                        Synapse { source: 0, delay: 2.0, weight: 0.0 },
                    ],
                },
            ],
        };
        let score = SpikeScore::new(
            1.0,
            10.0,
            vec![SpikeTrain::new(10.0, vec![3.0]), SpikeTrain::empty(10.0)],
        )
        .unwrap();
        let params = TemplateParams::defaults(1.0, 1.0);
        let res = synthesize_neuron(&net, 0, &[&score], &params, &SolveOptions::default()).unwrap();
        assert_eq!(res.status, SynthesisStatus::Infeasible);
    }

    #[test]
    fn iteration_cap_is_not_infeasibility() {
        let row = RowSpec {
            kind: RowKind::Firing,
            time: 0.0,
            memory: 0,
            sense: Sense::Ge,
            rhs: 1.0,
            grid: None,
        };
        let mut sys = bare_system(DMatrix::from_row_slice(1, 3, &[0.5, 0.3, 0.2]), vec![row], 1.5);
        let mut opts = SolveOptions::default();
        opts.ipm.max_iter = 1;
        let res = solve_weights(&mut sys, &TemplateParams::defaults(1.0, 1.0), &opts);
        assert_eq!(res.status, SynthesisStatus::SolverLimit);
    }

    #[test]
    fn regularizer_round_trips_through_text() {
        for nu in [Regularizer::L1, Regularizer::L2, Regularizer::None] {
            assert_eq!(nu.to_string().parse::<Regularizer>().unwrap(), nu);
        }
        assert!("3".parse::<Regularizer>().is_err());
    }

    #[test]
    fn template_params_reject_bad_ranges() {
        let net = Network {
            num_neurons: 1,
            num_inputs: 1,
            beta: 1.0,
            theta0: 1.0,
            tau0: 1.0,
            d_min: 0.5,
            d_max: 2.0,
            neurons: vec![Neuron {
                synapses: vec![Synapse { source: 0, delay: 1.0, weight: 0.0 }],
            }],
        };
        let ok = TemplateParams::defaults(1.0, 1.0);
        assert!(ok.validate(&net).is_ok());
        assert!(TemplateParams { w_b: 1.0, ..ok }.validate(&net).is_err());
        assert!(TemplateParams { theta_dot_s: -1.0, ..ok }.validate(&net).is_err());
        assert!(TemplateParams { theta_r: 1.0, ..ok }.validate(&net).is_err());
        assert!(TemplateParams { dt: 0.0, ..ok }.validate(&net).is_err());
    }
}
