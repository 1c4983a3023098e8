//! Output files: records and summaries as CSV, the full result as JSON, and
//! `x,y,series` plot data.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::logistic::{logistic, Crossover};
use crate::record::{ExperimentResult, Record};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Plotdata,
}

impl FromStr for Format {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "plotdata" => Ok(Format::Plotdata),
            other => Err(HarnessError::Config(format!("unknown output format `{other}`"))),
        }
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let wrap = |source| HarnessError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let wrap = |source| HarnessError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(wrap)?;
    r.deserialize().map(|row| row.map_err(wrap)).collect()
}

pub fn read_result(path: &Path) -> Result<ExperimentResult> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.to_path_buf(), source })
}

#[derive(Serialize)]
struct FitRow {
    num_inputs: usize,
    crossover: &'static str,
    t: f64,
    a: f64,
    b: f64,
    sse: f64,
}

#[derive(Serialize)]
struct PointRow {
    num_inputs: usize,
    period_len: f64,
    feasible_fraction: f64,
    reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub series: String,
}

/// Medians of the summary, plus fitted curves for capacity runs.
///
/// `x` is the noise level when the row has one, else the window (in
/// periods), else 0; the series label joins the remaining key fields.
pub fn plot_points(res: &ExperimentResult) -> Vec<PlotPoint> {
    let mut out = Vec::new();
    if res.kind == "capacity" {
        for f in &res.fits {
            for &(t, frac, _) in &f.points {
                out.push(PlotPoint { x: t, y: frac, series: format!("K={}", f.num_inputs) });
            }
            if let Crossover::Estimate(_) = f.crossover {
                let (lo, hi) = (f.points[0].0, f.points[f.points.len() - 1].0);
                for i in 0..=100 {
                    let t = lo + (hi - lo) * i as f64 / 100.0;
                    out.push(PlotPoint { x: t, y: logistic(f.a, f.b, t), series: format!("K={} fit", f.num_inputs) });
                }
            }
        }
        return out;
    }
    for s in &res.summary {
        let x = s.sigma_theta.or(s.window.map(|w| w as f64)).unwrap_or(0.0);
        let mut label = vec![s.setting.clone(), s.metric.clone()];
        label.extend(s.group.clone());
        label.extend(s.memory.clone());
        if s.sigma_theta.is_some() {
            label.extend(s.window.map(|w| format!("{w}T")));
        }
        out.push(PlotPoint { x, y: s.median, series: label.join("/") });
    }
    out
}

/// Writes `result` to `dir` in `format` and returns the paths written.
pub fn emit(res: &ExperimentResult, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let path = |suffix: &str| dir.join(format!("{}_{suffix}", res.kind));
    let mut written = Vec::new();
    match format {
        Format::Json => {
            let p = dir.join(format!("{}.json", res.kind));
            let text = serde_json::to_string_pretty(res).map_err(|source| HarnessError::Json { path: p.clone(), source })?;
            fs::write(&p, text).map_err(|e| HarnessError::io(&p, e))?;
            written.push(p);
        }
        Format::Csv => {
            let p = path("records.csv");
            write_csv(&p, &res.records)?;
            written.push(p);
            let p = path("summary.csv");
            write_csv(&p, &res.summary)?;
            written.push(p);
            if !res.fits.is_empty() {
                let fits: Vec<FitRow> = res
                    .fits
                    .iter()
                    .map(|f| FitRow {
                        num_inputs: f.num_inputs,
                        crossover: match f.crossover {
                            Crossover::Estimate(_) => "estimate",
                            Crossover::Below(_) => "below",
                            Crossover::Above(_) => "above",
                        },
                        t: f.crossover.value(),
                        a: f.a,
                        b: f.b,
                        sse: f.sse,
                    })
                    .collect();
                let p = path("fits.csv");
                write_csv(&p, &fits)?;
                written.push(p);
                let points: Vec<PointRow> = res
                    .fits
                    .iter()
                    .flat_map(|f| {
                        f.points.iter().map(|&(t, frac, reps)| PointRow {
                            num_inputs: f.num_inputs,
                            period_len: t,
                            feasible_fraction: frac,
                            reps,
                        })
                    })
                    .collect();
                let p = path("points.csv");
                write_csv(&p, &points)?;
                written.push(p);
            }
        }
        Format::Plotdata => {
            let p = path("plot.csv");
            write_csv(&p, &plot_points(res))?;
            written.push(p);
        }
    }
    Ok(written)
}
