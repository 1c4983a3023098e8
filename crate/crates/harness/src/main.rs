use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spikeloop::metrics::{evaluate_run, reports_to_csv};
use spikeloop::model::Network;
use spikeloop::sim::{simulate, InitMode, SimConfig, SimRun};
use spikeloop::stability::{self, analyze};
use spikeloop::synth::{synthesize_network, SolveOptions};
use spikeloop::SpikeScore;
use spikeloop_harness::emit::{emit, read_result, Format};
use spikeloop_harness::experiments::{run_ablation, run_capacity, run_noise, run_recall, sample_instance, Ablation, RecallMode};
use spikeloop_harness::seeds::{task_rng, Domain};
use spikeloop_harness::{ExperimentConfig, ExperimentResult, HarnessError, Result};

#[derive(Parser)]
#[command(name = "spikeloop", version, about = "Memorize random spike scores in recurrent spiking networks")]
struct Cli {
    /// TOML configuration file (keys as in `ExperimentConfig`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Start from the reduced desk preset (L = 50, 20 repetitions).
    #[arg(long, global = true)]
    desk: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Parameter override `key=value`, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(flatten)]
    params: ParamFlags,
    #[command(subcommand)]
    command: Command,
}

/// Shorthands for the model parameters.
#[derive(Args)]
struct ParamFlags {
    #[arg(long = "L", global = true)]
    l: Option<usize>,
    #[arg(long = "K", global = true)]
    k: Option<usize>,
    #[arg(long = "T", global = true)]
    t: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    theta0: Option<f64>,
    #[arg(long, global = true)]
    sigma_theta: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    tau0: Option<f64>,
    #[arg(long, global = true)]
    eps_s: Option<f64>,
    #[arg(long, global = true)]
    theta_r: Option<f64>,
    #[arg(long, global = true)]
    theta_dot_s: Option<f64>,
    #[arg(long, global = true)]
    w_b: Option<f64>,
    /// Regularizer: 1, 2 or none.
    #[arg(long, global = true)]
    nu: Option<String>,
    #[arg(long, global = true)]
    reps: Option<usize>,
}

impl ParamFlags {
    fn overrides(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut push = |k: &str, val: Option<String>| {
            if let Some(val) = val {
                v.push(format!("{k}={val}"));
            }
        };
        push("L", self.l.map(|x| x.to_string()));
        push("K", self.k.map(|x| x.to_string()));
        push("T", self.t.map(|x| x.to_string()));
        push("beta", self.beta.map(|x| x.to_string()));
        push("theta0", self.theta0.map(|x| x.to_string()));
        push("sigma_theta", self.sigma_theta.map(|x| x.to_string()));
        push("lambda", self.lambda.map(|x| x.to_string()));
        push("tau0", self.tau0.map(|x| x.to_string()));
        push("eps_s", self.eps_s.map(|x| x.to_string()));
        push("theta_r", self.theta_r.map(|x| x.to_string()));
        push("theta_dot_s", self.theta_dot_s.map(|x| x.to_string()));
        push("w_b", self.w_b.map(|x| x.to_string()));
        push("nu", self.nu.as_ref().map(|x| format!("\"{x}\"")));
        push("reps", self.reps.map(|x| x.to_string()));
        v
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random network and spike score.
    Generate {
        /// Repetition index of the instance stream.
        #[arg(long, default_value_t = 0)]
        rep: u64,
    },
    /// Synthesize weights for a network and one or two scores.
    Synthesize {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, required = true)]
        score: Vec<PathBuf>,
        /// Attempt every neuron even after an infeasible one.
        #[arg(long)]
        all: bool,
    },
    /// Run the network.
    Simulate {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        score: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        periods: f64,
        #[arg(long, value_enum, default_value_t = Init::Exact)]
        init: Init,
        #[arg(long, value_enum, default_value_t = RunFormat::Json)]
        format: RunFormat,
    },
    /// Precision and recall of a saved run.
    Metrics {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        score: PathBuf,
        /// Window starts in periods.
        #[arg(long, value_delimiter = ',', default_value = "5,20")]
        windows: Vec<usize>,
    },
    /// Monodromy spectrum of a synthesized network.
    Stability {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        score: PathBuf,
        /// Normalize firings with non-positive slope instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Run an experiment and write its outputs.
    Experiment {
        #[command(subcommand)]
        which: Experiment,
        /// Output formats, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "csv,json,plotdata")]
        format: Vec<String>,
    },
    /// Re-emit a saved JSON result in other formats.
    Emit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "csv,plotdata")]
        format: Vec<String>,
    },
}

#[derive(Subcommand)]
enum Experiment {
    Noise,
    Capacity,
    Ablation {
        #[arg(long, value_enum)]
        axis: AxisArg,
    },
    Recall {
        #[arg(long, value_enum, default_value_t = ModeArg::Quiet)]
        mode: ModeArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Slope,
    Regularization,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Quiet,
    Switching,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Init {
    Exact,
    Quiet,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum RunFormat {
    Json,
    Csv,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))?;
    println!("{}", path.display());
    Ok(())
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, cli.desk) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, true) => ExperimentConfig::desk(),
        (None, false) => ExperimentConfig::default(),
    };
    if cli.config.is_some() && cli.desk {
        cfg.apply_overrides(&["L=50".into(), "reps=20".into()])?;
    }
    let mut overrides = cli.params.overrides();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    overrides.extend(cli.overrides.iter().cloned());
    cfg.apply_overrides(&overrides)?;
    Ok(cfg)
}

fn formats(list: &[String]) -> Result<Vec<Format>> {
    list.iter().map(|s| s.parse()).collect()
}

fn emit_all(res: &ExperimentResult, formats: &[Format], dir: &Path) -> Result<()> {
    for &f in formats {
        for p in emit(res, f, dir)? {
            println!("{}", p.display());
        }
    }
    Ok(())
}

/// Exit code 2 marks a run that produced no feasible synthesis at all.
fn run(cli: Cli) -> Result<u8> {
    let cfg = load_config(&cli)?;
    let out = &cli.out_dir;
    match &cli.command {
        Command::Generate { rep } => {
            let (net, scores) = sample_instance(&cfg, Domain::Instance, *rep, 0, 1)?;
            write(&out.join("network.json"), &net.to_json()?)?;
            write(&out.join("score.json"), &scores[0].to_json()?)?;
            Ok(0)
        }
        Command::Synthesize { network, score, all } => {
            let mut net = Network::from_json(&read(network)?)?;
            let scores = score.iter().map(|p| Ok(SpikeScore::from_json(&read(p)?)?)).collect::<Result<Vec<_>>>()?;
            let refs: Vec<&SpikeScore> = scores.iter().collect();
            let res = synthesize_network(&mut net, &refs, &cfg.template(), &SolveOptions::default(), !all)?;
            let report = serde_json::to_string_pretty(&res).map_err(|source| HarnessError::Json { path: out.join("synthesis.json"), source })?;
            write(&out.join("synthesis.json"), &report)?;
            eprintln!("{}/{} neurons feasible", res.num_feasible(), net.num_neurons);
            if res.feasible {
                write(&out.join("network_synth.json"), &net.to_json()?)?;
                Ok(0)
            } else {
                Ok(2)
            }
        }
        Command::Simulate { network, score, periods, init, format } => {
            let net = Network::from_json(&read(network)?)?;
            let score = SpikeScore::from_json(&read(score)?)?;
            let mode = if *init == Init::Exact { InitMode::ExactScore } else { InitMode::Quiet };
            let sim = SimConfig::new(periods * score.period, cfg.sigma_theta, mode);
            let mut rng = task_rng(cfg.seed, Domain::Cli, 0, 0);
            let run = simulate(&net, &sim, Some(&score), &mut rng)?;
            match format {
                RunFormat::Json => write(&out.join("run.json"), &run.to_json()?)?,
                RunFormat::Csv => write(&out.join("run.csv"), &run.to_csv())?,
            }
            Ok(0)
        }
        Command::Metrics { run, score, windows } => {
            let run = SimRun::from_json(&read(run)?)?;
            let score = SpikeScore::from_json(&read(score)?)?;
            let rows = windows
                .iter()
                .map(|&w| Ok((format!("{w}T"), evaluate_run(&run, &score, w as f64 * score.period, None)?)))
                .collect::<Result<Vec<_>>>()?;
            write(&out.join("metrics.csv"), &reports_to_csv(&rows))?;
            Ok(0)
        }
        Command::Stability { network, score, lenient } => {
            let net = Network::from_json(&read(network)?)?;
            let score = SpikeScore::from_json(&read(score)?)?;
            let rep = analyze(&net, &score, *lenient)?;
            write(&out.join("stability.csv"), &stability::reports_to_csv(&[("network".into(), rep)]))?;
            Ok(0)
        }
        Command::Experiment { which, format } => {
            let formats = formats(format)?;
            let res = match which {
                Experiment::Noise => run_noise(&cfg)?,
                Experiment::Capacity => run_capacity(&cfg)?,
                Experiment::Ablation { axis } => run_ablation(
                    &cfg,
                    match axis {
                        AxisArg::Slope => Ablation::Slope,
                        AxisArg::Regularization => Ablation::Regularization,
                    },
                )?,
                Experiment::Recall { mode } => run_recall(
                    &cfg,
                    match mode {
                        ModeArg::Quiet => RecallMode::Quiet,
                        ModeArg::Switching => RecallMode::Switching,
                    },
                )?,
            };
            emit_all(&res, &formats, out)?;
            Ok(if res.num_feasible() == 0 && res.kind != "capacity" { 2 } else { 0 })
        }
        Command::Emit { input, format } => {
            let res = read_result(input)?;
            emit_all(&res, &formats(format)?, out)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
