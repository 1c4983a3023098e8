//! Least-squares logistic fit `p(T) = 1/(1 + exp(a(T − b)))` of empirical
//! feasibility against the period.

use serde::{Deserialize, Serialize};

/// Where the 50% crossover lies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "t")]
pub enum Crossover {
    Estimate(f64),
    /// Every point was infeasible; the crossover lies below this period.
    Below(f64),
    /// Every point was feasible; the crossover lies above this period.
    Above(f64),
}

impl Crossover {
    /// Interval known to contain the crossover.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Crossover::Estimate(b) => (b, b),
            Crossover::Below(t) => (f64::NEG_INFINITY, t),
            Crossover::Above(t) => (t, f64::INFINITY),
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Crossover::Estimate(t) | Crossover::Below(t) | Crossover::Above(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityFit {
    pub num_inputs: usize,
    /// `(T, feasible fraction, repetitions)` per swept period.
    pub points: Vec<(f64, f64, usize)>,
    pub a: f64,
    pub b: f64,
    pub crossover: Crossover,
    pub sse: f64,
}

pub fn logistic(a: f64, b: f64, t: f64) -> f64 {
    1.0 / (1.0 + (a * (t - b)).exp())
}

fn sse(a: f64, b: f64, pts: &[(f64, f64)]) -> f64 {
    pts.iter().map(|&(t, p)| (logistic(a, b, t) - p).powi(2)).sum()
}

/// Fits `(a, b)` by a coarse grid search followed by Levenberg–Marquardt.
pub fn fit_logistic(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let tmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let tmax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let span = (tmax - tmin).max(1e-9);
    let mut best = (1.0 / span, 0.5 * (tmin + tmax), f64::INFINITY);
    for i in 0..=200 {
        let b = tmin - 0.5 * span + 2.0 * span * i as f64 / 200.0;
        for j in 0..=60 {
            let a = 10f64.powf(-1.0 + 4.0 * j as f64 / 60.0) / span;
            let e = sse(a, b, pts);
            if e < best.2 {
                best = (a, b, e);
            }
        }
    }
    let (mut a, mut b, mut e) = best;
    let mut lambda = 1e-3;
    for _ in 0..200 {
        // normal equations of the 2-parameter Gauss–Newton step
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for &(t, p) in pts {
            let f = logistic(a, b, t);
            let d = -f * (1.0 - f);
            let g = [d * (t - b), -d * a];
            let r = p - f;
            for u in 0..2 {
                jtr[u] += g[u] * r;
                for v in 0..2 {
                    jtj[u][v] += g[u] * g[v];
                }
            }
        }
        let m = [[jtj[0][0] * (1.0 + lambda), jtj[0][1]], [jtj[1][0], jtj[1][1] * (1.0 + lambda)]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let da = (m[1][1] * jtr[0] - m[0][1] * jtr[1]) / det;
        let db = (m[0][0] * jtr[1] - m[1][0] * jtr[0]) / det;
        let e_new = sse(a + da, b + db, pts);
        if e_new < e {
            a += da;
            b += db;
            lambda = (lambda * 0.3).max(1e-12);
            if e - e_new < 1e-15 * e.max(1e-30) {
                e = e_new;
                break;
            }
            e = e_new;
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (a, b, e)
}

/// Fit for one `K`; all-zero or all-one data yield a bound instead of an estimate.
pub fn capacity_fit(num_inputs: usize, points: Vec<(f64, f64, usize)>) -> CapacityFit {
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.0, p.1)).collect();
    let tmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let tmax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if pts.iter().all(|p| p.1 == 0.0) {
        return CapacityFit {
            num_inputs,
            points,
            a: f64::NAN,
            b: f64::NAN,
            crossover: Crossover::Below(tmin),
            sse: 0.0,
        };
    }
    if pts.iter().all(|p| p.1 == 1.0) {
        return CapacityFit {
            num_inputs,
            points,
            a: f64::NAN,
            b: f64::NAN,
            crossover: Crossover::Above(tmax),
            sse: 0.0,
        };
    }
    let (a, b, sse) = fit_logistic(&pts);
    CapacityFit {
        num_inputs,
        points,
        a,
        b,
        crossover: Crossover::Estimate(b),
        sse,
    }
}
