//! Per-repetition records and their min/median/max summaries.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::logistic::CapacityFit;

/// One measurement. Fields that do not apply to an experiment stay empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub experiment: String,
    /// Parameter setting, e.g. `theta_dot_s=0` or `default`.
    pub setting: String,
    pub rep: usize,
    pub feasible: bool,
    pub num_inputs: Option<usize>,
    pub period_len: Option<f64>,
    pub sigma_theta: Option<f64>,
    /// `all`, `forced` or `autonomous`.
    pub group: Option<String>,
    /// Memory scored against in switching runs (`R` or `B`).
    pub memory: Option<String>,
    /// Window start in periods.
    pub window: Option<usize>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub log10_phi1: Option<f64>,
    pub log10_phi2: Option<f64>,
    pub degenerate: Option<usize>,
}

impl Record {
    pub fn new(experiment: &str, setting: &str, rep: usize, feasible: bool) -> Self {
        Record {
            experiment: experiment.into(),
            setting: setting.into(),
            rep,
            feasible,
            num_inputs: None,
            period_len: None,
            sigma_theta: None,
            group: None,
            memory: None,
            window: None,
            precision: None,
            recall: None,
            log10_phi1: None,
            log10_phi2: None,
            degenerate: None,
        }
    }

    fn key(&self) -> SummaryKey {
        SummaryKey {
            setting: self.setting.clone(),
            num_inputs: self.num_inputs,
            period_len: self.period_len,
            sigma_theta: self.sigma_theta,
            group: self.group.clone(),
            memory: self.memory.clone(),
            window: self.window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SummaryKey {
    setting: String,
    num_inputs: Option<usize>,
    period_len: Option<f64>,
    sigma_theta: Option<f64>,
    group: Option<String>,
    memory: Option<String>,
    window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub setting: String,
    pub num_inputs: Option<usize>,
    pub period_len: Option<f64>,
    pub sigma_theta: Option<f64>,
    pub group: Option<String>,
    pub memory: Option<String>,
    pub window: Option<usize>,
    pub metric: String,
    /// Records contributing a value.
    pub count: usize,
    /// Records of this key, feasible or not.
    pub total: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// Median of a non-empty sample (mean of the two middle values for even sizes).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

const METRICS: [(&str, fn(&Record) -> Option<f64>); 5] = [
    ("precision", |r| r.precision),
    ("recall", |r| r.recall),
    ("log10_phi1", |r| r.log10_phi1),
    ("log10_phi2", |r| r.log10_phi2),
    ("feasible", |r| r.num_inputs.map(|_| if r.feasible { 1.0 } else { 0.0 })),
];

/// Min, median and max of every metric per setting, in order of first appearance.
pub fn summarize(records: &[Record]) -> Vec<SummaryRow> {
    let mut keys: Vec<SummaryKey> = Vec::new();
    for r in records {
        let k = r.key();
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut rows = Vec::new();
    for key in keys {
        let members: Vec<&Record> = records.iter().filter(|r| r.key() == key).collect();
        for (name, get) in METRICS {
            let values: Vec<f64> = members.iter().filter_map(|r| get(r)).filter(|v| !v.is_nan()).collect();
            if values.is_empty() {
                continue;
            }
            rows.push(SummaryRow {
                setting: key.setting.clone(),
                num_inputs: key.num_inputs,
                period_len: key.period_len,
                sigma_theta: key.sigma_theta,
                group: key.group.clone(),
                memory: key.memory.clone(),
                window: key.window,
                metric: name.into(),
                count: values.len(),
                total: members.len(),
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
                median: median(&values),
                max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub kind: String,
    pub config: ExperimentConfig,
    pub records: Vec<Record>,
    pub summary: Vec<SummaryRow>,
    pub fits: Vec<CapacityFit>,
}

impl ExperimentResult {
    pub fn new(kind: &str, config: &ExperimentConfig, records: Vec<Record>, fits: Vec<CapacityFit>) -> Self {
        ExperimentResult {
            kind: kind.into(),
            config: config.clone(),
            summary: summarize(&records),
            records,
            fits,
        }
    }

    pub fn num_feasible(&self) -> usize {
        self.records.iter().filter(|r| r.feasible).count()
    }

    /// Summary row matching `setting`, `metric` and the optional filters.
    pub fn find(&self, setting: &str, metric: &str, filter: impl Fn(&SummaryRow) -> bool) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.setting == setting && s.metric == metric && filter(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(setting: &str, pr: Option<f64>) -> Record {
        Record {
            precision: pr,
            ..Record::new("noise", setting, 0, pr.is_some())
        }
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn summary_skips_missing_values_and_orders_keys() {
        let rs = vec![rec("b", Some(0.5)), rec("a", Some(0.9)), rec("b", None), rec("b", Some(0.7))];
        let s = summarize(&rs);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].setting, "b");
        assert_eq!((s[0].count, s[0].total), (2, 3));
        assert!(s[0].min <= s[0].median && s[0].median <= s[0].max);
        assert_eq!(s[0].median, 0.6);
        assert_eq!(s[1].median, 0.9);
    }
}
