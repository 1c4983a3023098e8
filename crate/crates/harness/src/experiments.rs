//! Experiment drivers: noise robustness, capacity, ablations and recall.
//!
//! Instances depend only on `(seed, rep)`, so different settings of an
//! ablation see the same networks and scores. Infeasible repetitions are kept
//! as records with `feasible = false` and no metrics.

use rand::seq::index::sample;
use rayon::prelude::*;
use spikeloop::metrics::evaluate_run;
use spikeloop::model::{build_random_network, Network};
use spikeloop::score::{count_pmf, sample_score, SpikeScore};
use spikeloop::sim::{simulate, Forcing, InitMode, Phase, SimConfig};
use spikeloop::stability::analyze;
use spikeloop::synth::{synthesize_network, NetworkSynthesis, SolveOptions, TemplateParams};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::logistic::capacity_fit;
use crate::record::{ExperimentResult, Record};
use crate::seeds::{task_rng, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    Slope,
    Regularization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecallMode {
    Quiet,
    Switching,
}

/// A synthesized repetition. `scores` holds one memory, or two for switching.
#[derive(Debug, Clone)]
pub struct Instance {
    pub rep: usize,
    pub net: Network,
    pub scores: Vec<SpikeScore>,
    pub synthesis: NetworkSynthesis,
}

impl Instance {
    pub fn feasible(&self) -> bool {
        self.synthesis.feasible
    }

    pub fn score(&self) -> &SpikeScore {
        &self.scores[0]
    }
}

/// Random network and `memories` scores drawn from the stream of `(domain, a, b)`.
pub fn sample_instance(cfg: &ExperimentConfig, domain: Domain, a: u64, b: u64, memories: usize) -> Result<(Network, Vec<SpikeScore>)> {
    let mut rng = task_rng(cfg.seed, domain, a, b);
    let net = build_random_network(&cfg.topology(), &mut rng)?;
    let pmf = count_pmf(cfg.lambda, cfg.period, cfg.tau0)?;
    let scores = (0..memories)
        .map(|_| sample_score(cfg.num_neurons, &pmf, &mut rng))
        .collect::<spikeloop::Result<Vec<_>>>()?;
    Ok((net, scores))
}

fn synthesized(net: Network, scores: Vec<SpikeScore>, params: &TemplateParams, rep: usize) -> Result<Instance> {
    let mut net = net;
    let refs: Vec<&SpikeScore> = scores.iter().collect();
    let synthesis = synthesize_network(&mut net, &refs, params, &SolveOptions::default(), true)?;
    log::info!("rep {rep}: {} ({}/{} neurons)", if synthesis.feasible { "feasible" } else { "infeasible" }, synthesis.num_feasible(), net.num_neurons);
    Ok(Instance { rep, net, scores, synthesis })
}

/// Synthesized single-memory instance `rep`.
pub fn build_instance(cfg: &ExperimentConfig, params: &TemplateParams, rep: usize) -> Result<Instance> {
    let (net, scores) = sample_instance(cfg, Domain::Instance, rep as u64, 0, 1)?;
    synthesized(net, scores, params, rep)
}

pub fn build_instances(cfg: &ExperimentConfig, params: &TemplateParams, reps: usize) -> Result<Vec<Instance>> {
    (0..reps).map(|rep| build_instance(cfg, params, rep)).collect()
}

/// Two memories synthesized jointly into one network.
pub fn build_switch_instance(cfg: &ExperimentConfig, params: &TemplateParams, rep: usize) -> Result<Instance> {
    let (net, scores) = sample_instance(cfg, Domain::SwitchInstance, rep as u64, 0, 2)?;
    synthesized(net, scores, params, rep)
}

/// Noisy runs from the exact initial score, scored at each of `cfg.measure_periods`.
pub fn noise_records(cfg: &ExperimentConfig, setting: &str, instances: &[Instance], sigmas: &[f64]) -> Result<Vec<Record>> {
    let last = cfg.measure_periods.iter().copied().max().unwrap_or(0);
    let horizon = (last + 1) as f64 * cfg.period + cfg.tau0;
    let tasks: Vec<(&Instance, usize, f64)> = instances
        .iter()
        .flat_map(|inst| sigmas.iter().enumerate().map(move |(j, &s)| (inst, j, s)))
        .collect();
    let per_task: Vec<Result<Vec<Record>>> = tasks
        .par_iter()
        .map(|&(inst, j, sigma)| {
            let base = Record {
                sigma_theta: Some(sigma),
                group: Some("all".into()),
                ..Record::new("noise", setting, inst.rep, inst.feasible())
            };
            if !inst.feasible() {
                return Ok(cfg.measure_periods.iter().map(|&m| Record { window: Some(m), ..base.clone() }).collect());
            }
            let mut rng = task_rng(cfg.seed, Domain::Noise, inst.rep as u64, j as u64);
            let sim = SimConfig::new(horizon, sigma, InitMode::ExactScore);
            let run = simulate(&inst.net, &sim, Some(inst.score()), &mut rng)?;
            cfg.measure_periods
                .iter()
                .map(|&m| {
                    let acc = evaluate_run(&run, inst.score(), m as f64 * cfg.period, None)?;
                    Ok(Record {
                        window: Some(m),
                        precision: Some(acc.precision),
                        recall: Some(acc.recall),
                        ..base.clone()
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in per_task {
        out.extend(r?);
    }
    Ok(out)
}

/// Monodromy spectrum of every feasible instance. Degenerate firings are
/// normalized anyway and counted in `degenerate`.
pub fn spectral_records(setting: &str, instances: &[Instance]) -> Result<Vec<Record>> {
    instances
        .par_iter()
        .map(|inst| {
            let mut rec = Record::new("spectrum", setting, inst.rep, inst.feasible());
            if inst.feasible() {
                match analyze(&inst.net, inst.score(), true) {
                    Ok(rep) => {
                        rec.log10_phi1 = Some(rep.log10_phi1());
                        rec.log10_phi2 = Some(rep.log10_phi2());
                        rec.degenerate = Some(rep.degenerate);
                    }
                    Err(e) => log::warn!("rep {}: spectrum unavailable: {e}", inst.rep),
                }
            }
            Ok(rec)
        })
        .collect()
}

pub fn run_noise(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let instances = build_instances(cfg, &cfg.template(), cfg.reps)?;
    let mut records = noise_records(cfg, "default", &instances, &cfg.sigma_grid)?;
    records.extend(spectral_records("default", &instances)?);
    Ok(ExperimentResult::new("noise", cfg, records, Vec::new()))
}

/// Settings of an ablation axis as `(label, template)`.
pub fn ablation_settings(cfg: &ExperimentConfig, axis: Ablation) -> Vec<(String, TemplateParams)> {
    let base = cfg.template();
    match axis {
        Ablation::Slope => cfg
            .slope_grid
            .iter()
            .map(|&s| (format!("theta_dot_s={s}"), TemplateParams { theta_dot_s: s, ..base }))
            .collect(),
        Ablation::Regularization => cfg
            .weight_grid
            .iter()
            .map(|w| (format!("w_b={},nu={}", w.w_b, w.nu), TemplateParams { w_b: w.w_b, nu: w.nu, ..base }))
            .collect(),
    }
}

pub fn run_ablation(cfg: &ExperimentConfig, axis: Ablation) -> Result<ExperimentResult> {
    let mut records = Vec::new();
    for (label, params) in ablation_settings(cfg, axis) {
        log::info!("ablation setting {label}");
        let instances = build_instances(cfg, &params, cfg.reps)?;
        records.extend(noise_records(cfg, &label, &instances, &cfg.sigma_grid)?);
        records.extend(spectral_records(&label, &instances)?);
    }
    let kind = match axis {
        Ablation::Slope => "ablation-slope",
        Ablation::Regularization => "ablation-regularization",
    };
    Ok(ExperimentResult::new(kind, cfg, records, Vec::new()))
}

/// Feasible fraction against `T` for each `K`, with a logistic crossover fit.
///
/// The `T` grid is swept upward; after `capacity_skip_after` consecutive
/// all-infeasible points the remaining larger periods are not attempted.
pub fn run_capacity(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let params = cfg.template();
    let mut records = Vec::new();
    let mut fits = Vec::new();
    for (ki, &k) in cfg.capacity_k.iter().enumerate() {
        let mut points = Vec::new();
        let mut zeros = 0;
        for (ti, &t) in cfg.capacity_t.iter().enumerate() {
            if cfg.capacity_skip_after > 0 && zeros >= cfg.capacity_skip_after {
                log::info!("K = {k}: skipping T ≥ {t}");
                break;
            }
            let sub = ExperimentConfig {
                num_inputs: k,
                period: t,
                ..cfg.clone()
            };
            let mut feasible = 0;
            for rep in 0..cfg.capacity_reps {
                let (net, scores) = sample_instance(&sub, Domain::Capacity, ((ki as u64) << 12) | ti as u64, rep as u64, 1)?;
                let inst = synthesized(net, scores, &params, rep)?;
                feasible += inst.feasible() as usize;
                records.push(Record {
                    num_inputs: Some(k),
                    period_len: Some(t),
                    ..Record::new("capacity", "default", rep, inst.feasible())
                });
            }
            let frac = feasible as f64 / cfg.capacity_reps as f64;
            log::info!("K = {k}, T = {t}: {feasible}/{}", cfg.capacity_reps);
            zeros = if feasible == 0 { zeros + 1 } else { 0 };
            points.push((t, frac, cfg.capacity_reps));
        }
        fits.push(capacity_fit(k, points));
    }
    Ok(ExperimentResult::new("capacity", cfg, records, fits))
}

/// Sorted random subset of `round(alpha·L)` neurons.
fn forced_set(cfg: &ExperimentConfig, alpha: f64, rng: &mut impl rand::Rng) -> Vec<usize> {
    let l = cfg.num_neurons;
    let n = ((alpha * l as f64).round() as usize).clamp(1, l);
    let mut set = sample(rng, l, n).into_vec();
    set.sort_unstable();
    set
}

fn complement(l: usize, set: &[usize]) -> Vec<usize> {
    (0..l).filter(|i| !set.contains(i)).collect()
}

/// Recall from a quiet start with a forced fraction `alpha`, scored per group.
pub fn recall_records(cfg: &ExperimentConfig, instances: &[Instance], sigmas: &[f64]) -> Result<Vec<Record>> {
    let horizon = (cfg.recall_periods + 1) as f64 * cfg.period + cfg.tau0;
    let tasks: Vec<(&Instance, usize, f64)> = instances
        .iter()
        .flat_map(|inst| sigmas.iter().enumerate().map(move |(j, &s)| (inst, j, s)))
        .collect();
    let per_task: Vec<Result<Vec<Record>>> = tasks
        .par_iter()
        .map(|&(inst, j, sigma)| {
            let base = Record {
                sigma_theta: Some(sigma),
                window: Some(cfg.recall_periods),
                ..Record::new("recall", "quiet", inst.rep, inst.feasible())
            };
            let groups = ["forced", "autonomous", "all"];
            if !inst.feasible() {
                return Ok(groups.iter().map(|g| Record { group: Some((*g).into()), ..base.clone() }).collect());
            }
            let mut rng = task_rng(cfg.seed, Domain::Recall, inst.rep as u64, j as u64);
            let forced = forced_set(cfg, cfg.alpha, &mut rng);
            let free = complement(cfg.num_neurons, &forced);
            let forcing = Forcing {
                neurons: forced.clone(),
                memories: vec![inst.score().clone()],
                schedule: vec![Phase { start: 0.0, end: horizon, target: Some(0) }],
                sigma_s: cfg.sigma_s,
                sweeps: cfg.gibbs_sweeps,
            };
            let sim = SimConfig {
                forcing: Some(forcing),
                ..SimConfig::new(horizon, sigma, InitMode::Quiet)
            };
            let run = simulate(&inst.net, &sim, None, &mut rng)?;
            let t0 = cfg.recall_periods as f64 * cfg.period;
            let mut out = Vec::new();
            for (g, subset) in groups.iter().zip([Some(&forced[..]), Some(&free[..]), None]) {
                if subset.is_some_and(|s| s.is_empty()) {
                    continue;
                }
                let acc = evaluate_run(&run, inst.score(), t0, subset)?;
                out.push(Record {
                    group: Some((*g).into()),
                    precision: Some(acc.precision),
                    recall: Some(acc.recall),
                    ..base.clone()
                });
            }
            Ok(out)
        })
        .collect();
    let mut out = Vec::new();
    for r in per_task {
        out.extend(r?);
    }
    Ok(out)
}

/// Memory switching: phases of length `T` follow `cfg.switch_schedule`; every
/// period is scored against both memories.
pub fn switch_records(cfg: &ExperimentConfig, instances: &[Instance]) -> Result<Vec<Record>> {
    let targets = cfg.schedule()?;
    if targets.is_empty() {
        return Err(HarnessError::Config("switch_schedule has no phases".into()));
    }
    let phases = targets.len();
    let horizon = phases as f64 * cfg.period + cfg.tau0;
    let per_inst: Vec<Result<Vec<Record>>> = instances
        .par_iter()
        .map(|inst| {
            let base = Record {
                sigma_theta: Some(cfg.sigma_theta),
                group: Some("all".into()),
                ..Record::new("recall", "switching", inst.rep, inst.feasible())
            };
            let mut out = Vec::new();
            if !inst.feasible() {
                for p in 0..phases {
                    for mem in ["R", "B"] {
                        out.push(Record { window: Some(p), memory: Some(mem.into()), ..base.clone() });
                    }
                }
                return Ok(out);
            }
            let mut rng = task_rng(cfg.seed, Domain::Switch, inst.rep as u64, 0);
            let forced = forced_set(cfg, cfg.switch_alpha, &mut rng);
            let forcing = Forcing {
                neurons: forced,
                memories: inst.scores.clone(),
                schedule: Forcing::periodic_phases(cfg.period, &targets),
                sigma_s: cfg.sigma_s,
                sweeps: cfg.gibbs_sweeps,
            };
            let sim = SimConfig {
                forcing: Some(forcing),
                ..SimConfig::new(horizon, cfg.sigma_theta, InitMode::Quiet)
            };
            let run = simulate(&inst.net, &sim, None, &mut rng)?;
            for p in 0..phases {
                for (mem, score) in ["R", "B"].iter().zip(&inst.scores) {
                    let acc = evaluate_run(&run, score, p as f64 * cfg.period, None)?;
                    out.push(Record {
                        window: Some(p),
                        memory: Some((*mem).into()),
                        precision: Some(acc.precision),
                        recall: Some(acc.recall),
                        ..base.clone()
                    });
                }
            }
            Ok(out)
        })
        .collect();
    let mut out = Vec::new();
    for r in per_inst {
        out.extend(r?);
    }
    Ok(out)
}

pub fn run_recall(cfg: &ExperimentConfig, mode: RecallMode) -> Result<ExperimentResult> {
    let params = cfg.template();
    match mode {
        RecallMode::Quiet => {
            let instances = build_instances(cfg, &params, cfg.reps)?;
            let records = recall_records(cfg, &instances, &cfg.recall_sigma_grid)?;
            Ok(ExperimentResult::new("recall-quiet", cfg, records, Vec::new()))
        }
        RecallMode::Switching => {
            let instances = (0..cfg.reps)
                .map(|rep| build_switch_instance(cfg, &params, rep))
                .collect::<Result<Vec<_>>>()?;
            let records = switch_records(cfg, &instances)?;
            Ok(ExperimentResult::new("recall-switching", cfg, records, Vec::new()))
        }
    }
}
