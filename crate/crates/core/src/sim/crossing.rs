//! Threshold-crossing localization on an arrival-free stretch of potential.
//!
//! Between arrivals the potential is `(a + bτ) exp(−τ/β)`, which has a single
//! critical point at `τc = β − a/b`. Splitting at `τc` leaves monotone pieces,
//! so every crossing is bracketed exactly and none can be stepped over.

use crate::model::KernelTrace;

/// Absolute time resolution of the returned crossing.
pub const CROSSING_TOL: f64 = 1e-13;

/// Earliest `t ≥ t_from` at which `trace` reaches `theta`, assuming no further
/// arrivals. The returned time satisfies `z(t) ≥ theta` as evaluated.
pub fn find_next_crossing(trace: &KernelTrace, beta: f64, theta: f64, t_from: f64) -> Option<f64> {
    debug_assert!(t_from >= trace.t_ref);
    let (a, b) = (trace.a, trace.b);
    let f = |tau: f64| (a + b * tau) * (-tau / beta).exp();
    let tau_s = t_from - trace.t_ref;
    if f(tau_s) >= theta {
        return Some(t_from);
    }
    let tau_c = if b != 0.0 { beta - a / b } else { f64::NEG_INFINITY };
    let root = if b > 0.0 {
        // rises to its maximum at τc, then decays towards 0⁺
        if tau_s < tau_c && f(tau_c) >= theta {
            Some(bisect_increasing(&f, theta, tau_s, tau_c))
        } else {
            None
        }
    } else if theta < 0.0 && (b < 0.0 || a < 0.0) {
        // eventually rises towards 0⁻, so a negative threshold is reached
        let lo = tau_s.max(tau_c);
        let mut step = beta;
        let mut hi = lo + step;
        while f(hi) < theta {
            step *= 2.0;
            hi = lo + step;
        }
        Some(bisect_increasing(&f, theta, lo, hi))
    } else {
        None
    };
    root.map(|tau| (trace.t_ref + tau).max(t_from))
}

/// Bisection with Newton-free safeguards on an increasing bracket
/// `f(lo) < theta ≤ f(hi)`; returns a point with `f ≥ theta`.
fn bisect_increasing(f: &impl Fn(f64) -> f64, theta: f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo) - theta;
    let mut f_hi = f(hi) - theta;
    for _ in 0..200 {
        if hi - lo <= CROSSING_TOL {
            break;
        }
        // regula falsi step, falling back to the midpoint when it stalls near an end
        let mut mid = lo - f_lo * (hi - lo) / (f_hi - f_lo);
        let span = hi - lo;
        if !(mid > lo + 0.05 * span && mid < hi - 0.05 * span) {
            mid = 0.5 * (lo + hi);
        }
        let fm = f(mid) - theta;
        if fm >= 0.0 {
            hi = mid;
            f_hi = fm;
        } else {
            lo = mid;
            f_lo = fm;
        }
    }
    hi
}
