//! Experiment configuration: model defaults, sweep axes and run sizes.
//!
//! Keys follow the model symbols (`L`, `K`, `T`, `theta_dot_s`, ...). Times
//! are in units of `τ0` and potentials in units of `θ0` unless `tau0` or
//! `theta0` are changed, in which case every value is still absolute.

use std::path::Path;

use serde::{Deserialize, Serialize};
use spikeloop::model::TopologyParams;
use spikeloop::synth::{Regularizer, TemplateParams};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSetting {
    pub w_b: f64,
    #[serde(with = "nu_text")]
    pub nu: Regularizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "L")]
    pub num_neurons: usize,
    #[serde(rename = "K")]
    pub num_inputs: usize,
    pub beta: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub theta0: f64,
    pub sigma_theta: f64,
    #[serde(rename = "T")]
    pub period: f64,
    pub lambda: f64,
    pub tau0: f64,
    pub eps_s: f64,
    pub theta_r: f64,
    pub theta_dot_s: f64,
    pub w_b: f64,
    #[serde(with = "nu_text")]
    pub nu: Regularizer,
    /// Grid step of the template rows.
    pub dt: f64,

    pub seed: u64,
    pub reps: usize,
    /// Window starts (in periods) at which noise runs are scored.
    pub measure_periods: Vec<usize>,
    /// Threshold noise levels of the noise and ablation experiments.
    pub sigma_grid: Vec<f64>,
    /// `θ̇_s` values of the slope ablation.
    pub slope_grid: Vec<f64>,
    /// `(w_b, ν)` pairs of the regularization ablation.
    pub weight_grid: Vec<WeightSetting>,

    pub capacity_k: Vec<usize>,
    pub capacity_t: Vec<f64>,
    pub capacity_reps: usize,
    /// Stop sweeping a `K` upward after this many consecutive all-infeasible points (0 = never).
    pub capacity_skip_after: usize,

    pub alpha: f64,
    pub sigma_s: f64,
    pub gibbs_sweeps: usize,
    pub recall_sigma_grid: Vec<f64>,
    pub recall_periods: usize,
    pub switch_alpha: f64,
    /// One phase of length `T` per entry: `R`, `B`, or `-` (autonomous).
    pub switch_schedule: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            num_neurons: 200,
            num_inputs: 500,
            beta: 1.0,
            d_min: 0.1,
            d_max: 10.0,
            theta0: 1.0,
            sigma_theta: 0.1,
            period: 50.0,
            lambda: 0.2,
            tau0: 1.0,
            eps_s: 0.2,
            theta_r: 0.0,
            theta_dot_s: 2.0,
            w_b: 0.2,
            nu: Regularizer::L2,
            dt: 0.02,
            seed: 1,
            reps: 100,
            measure_periods: vec![5, 20],
            sigma_grid: vec![0.05, 0.1, 0.15],
            slope_grid: vec![0.0, 1.0, 2.0],
            weight_grid: [0.2, 0.5]
                .into_iter()
                .flat_map(|w_b| {
                    [Regularizer::None, Regularizer::L1, Regularizer::L2]
                        .into_iter()
                        .map(move |nu| WeightSetting { w_b, nu })
                })
                .collect(),
            capacity_k: vec![125, 250, 500],
            capacity_t: vec![2.5, 5.0, 10.0, 20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 160.0, 200.0],
            capacity_reps: 10,
            capacity_skip_after: 2,
            alpha: 0.5,
            sigma_s: 0.1,
            gibbs_sweeps: 1000,
            recall_sigma_grid: vec![0.05, 0.1, 0.2],
            recall_periods: 10,
            switch_alpha: 0.75,
            switch_schedule: "R R - - B B - - R - B -".into(),
        }
    }
}

impl ExperimentConfig {
    /// Reduced sizes for a single workstation: `L = 50`, 20 repetitions.
    pub fn desk() -> Self {
        ExperimentConfig {
            num_neurons: 50,
            reps: 20,
            ..Default::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies `key=value` overrides using the same keys as the config file.
    pub fn apply_overrides(&mut self, pairs: &[String]) -> Result<()> {
        if pairs.is_empty() {
            return Ok(());
        }
        let mut table: toml::Table = toml::from_str(&self.to_toml()).expect("config round-trips");
        for pair in pairs {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("override `{pair}` is not key=value")))?;
            let key = key.trim();
            if !table.contains_key(key) {
                return Err(HarnessError::Config(format!("unknown parameter `{key}`")));
            }
            let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {}", value.trim()))
                .map(|mut t| t.remove("v").expect("key present"))
                .unwrap_or_else(|_| toml::Value::String(value.trim().to_string()));
            // integers are accepted where floats are expected
            let parsed = match (&table[key], parsed) {
                (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
                (_, v) => v,
            };
            table.insert(key.to_string(), parsed);
        }
        let text = toml::to_string(&table).expect("table serializes");
        *self = Self::from_toml(&text)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.num_neurons == 0 || self.num_inputs == 0 {
            return bad("L and K must be positive".into());
        }
        if !(self.tau0 > 0.0 && self.beta > 0.0 && self.theta0 > 0.0) {
            return bad("tau0, beta and theta0 must be positive".into());
        }
        if !(self.period > self.tau0) {
            return bad(format!("T = {} must exceed tau0", self.period));
        }
        if !(self.lambda > 0.0) {
            return bad("lambda must be positive".into());
        }
        if !(self.d_min > 0.0 && self.d_max >= self.d_min) {
            return bad("need 0 < d_min ≤ d_max".into());
        }
        if !(self.w_b > 0.0 && self.w_b < self.theta0) {
            return bad("need 0 < w_b < theta0".into());
        }
        if !(self.theta_dot_s >= 0.0 && self.theta_r < self.theta0) {
            return bad("need theta_dot_s ≥ 0 and theta_r < theta0".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0 && self.switch_alpha > 0.0 && self.switch_alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]".into());
        }
        if self.reps == 0 || self.capacity_reps == 0 || self.gibbs_sweeps == 0 {
            return bad("repetition and sweep counts must be positive".into());
        }
        if self.sigma_theta < 0.0 || self.sigma_s < 0.0 || self.sigma_grid.iter().any(|&s| s < 0.0) {
            return bad("noise levels must be ≥ 0".into());
        }
        self.schedule()?;
        Ok(())
    }

    pub fn topology(&self) -> TopologyParams {
        TopologyParams {
            num_neurons: self.num_neurons,
            num_inputs: self.num_inputs,
            d_min: self.d_min,
            d_max: self.d_max,
            beta: self.beta,
            theta0: self.theta0,
            tau0: self.tau0,
        }
    }

    pub fn template(&self) -> TemplateParams {
        TemplateParams {
            eps_s: self.eps_s,
            theta_r: self.theta_r,
            theta_dot_s: self.theta_dot_s,
            w_b: self.w_b,
            nu: self.nu,
            dt: self.dt,
            ..TemplateParams::defaults(self.tau0, self.theta0)
        }
    }

    /// Phase targets of the switching run: `Some(0)` for R, `Some(1)` for B.
    pub fn schedule(&self) -> Result<Vec<Option<usize>>> {
        self.switch_schedule
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| match s {
                "R" | "r" => Ok(Some(0)),
                "B" | "b" => Ok(Some(1)),
                "-" => Ok(None),
                other => Err(HarnessError::Config(format!("unknown phase `{other}` in switch_schedule"))),
            })
            .collect()
    }
}

mod nu_text {
    use serde::{de, Deserialize, Deserializer, Serializer};
    use spikeloop::synth::Regularizer;

    pub fn serialize<S: Serializer>(nu: &Regularizer, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&nu.to_string())
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(i64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Regularizer, D::Error> {
        let text = match Raw::deserialize(d)? {
            Raw::Int(i) => i.to_string(),
            Raw::Text(s) => s,
        };
        text.parse().map_err(de::Error::custom)
    }
}
