//! Goodness-of-fit tests.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Pearson chi-square p-value of integer counts against `probs`. Tail cells
/// with expected count below 5 are pooled into their neighbor.
pub fn chi_square_pvalue(counts: &[usize], probs: &[f64]) -> f64 {
    let total: usize = counts.iter().sum();
    let len = counts.len().max(probs.len());
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for i in 0..len {
        obs += counts.get(i).copied().unwrap_or(0) as f64;
        exp += probs.get(i).copied().unwrap_or(0.0) * total as f64;
        if exp >= 5.0 {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if let Some(last) = cells.last_mut() {
        last.0 += obs;
        last.1 += exp;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// One-sample Kolmogorov–Smirnov p-value (asymptotic, with the Stephens correction).
pub fn ks_pvalue(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    let x = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-2.0 * (k * k) as f64 * x * x).exp();
        p += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// CDF of `N(mean, sigma²)` truncated to `[lo, hi]`.
pub fn truncated_normal_cdf(mean: f64, sigma: f64, lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    let nd = Normal::new(mean, sigma).unwrap();
    let (flo, fhi) = (nd.cdf(lo), nd.cdf(hi));
    move |x| ((nd.cdf(x.clamp(lo, hi)) - flo) / (fhi - flo)).clamp(0.0, 1.0)
}

/// Marginal CDF of `x1` when `(x1, x2) ~ N((m1, m2), σ²I)` is conditioned on
/// `x2 − x1 > gap`, by Simpson integration of `φ(x1)·P(x2 > x1 + gap)`.
pub fn pair_first_marginal_cdf(m1: f64, m2: f64, sigma: f64, gap: f64) -> impl Fn(f64) -> f64 {
    let nd = Normal::new(0.0, 1.0).unwrap();
    let density = move |x: f64| {
        let z = (x - m1) / sigma;
        (-0.5 * z * z).exp() * (1.0 - nd.cdf((x + gap - m2) / sigma))
    };
    let (lo, hi) = (m1 - 10.0 * sigma, m1 + 10.0 * sigma);
    let steps = 20_000;
    let h = (hi - lo) / steps as f64;
    // cumulative integral on the grid by composite Simpson over pairs of cells
    let mut cum = vec![0.0; steps + 1];
    for i in (0..steps).step_by(2) {
        let (a, b, c) = (density(lo + i as f64 * h), density(lo + (i + 1) as f64 * h), density(lo + (i + 2) as f64 * h));
        cum[i + 1] = cum[i] + h / 12.0 * (5.0 * a + 8.0 * b - c);
        cum[i + 2] = cum[i] + h / 3.0 * (a + 4.0 * b + c);
    }
    let total = cum[steps];
    move |x: f64| {
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let u = (x - lo) / h;
        let i = (u.floor() as usize).min(steps - 1);
        let frac = u - i as f64;
        (cum[i] + frac * (cum[i + 1] - cum[i])) / total
    }
}
