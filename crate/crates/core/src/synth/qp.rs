//! Dense primal-dual interior-point method for box-constrained QPs with
//! general inequality rows:
//!
//! ```text
//! minimize   ½ xᵀ diag(p) x + cᵀx
//! subject to A x ≥ b,   lower ≤ x ≤ upper
//! ```
//!
//! Mehrotra predictor-corrector on the reduced normal equations. The box is
//! kept strictly feasible, so infeasibility can be certified from the row
//! duals alone: any `y ≥ 0` with `bᵀy > max_{box} yᵀA x` proves that no `x`
//! satisfies all rows.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub p: DVector<f64>,
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmOptions {
    pub max_iter: usize,
    /// Primal and dual residual tolerance, relative to the data scale.
    pub feas_tol: f64,
    /// Average complementarity at termination.
    pub gap_tol: f64,
    /// Looser tolerance accepted when progress stalls before `feas_tol`.
    pub acceptable_tol: f64,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions {
            max_iter: 100,
            feas_tol: 1e-10,
            gap_tol: 1e-10,
            acceptable_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub status: QpStatus,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub iterations: usize,
    pub objective: f64,
}

/// Value of the Farkas test `bᵀy − max_{lower ≤ x ≤ upper} yᵀA x`, scaled by `‖y‖₁`.
/// Positive values prove infeasibility.
pub fn infeasibility_certificate(prob: &QpProblem, y: &DVector<f64>) -> f64 {
    let norm: f64 = y.iter().map(|v| v.abs()).sum();
    if norm == 0.0 {
        return f64::NEG_INFINITY;
    }
    let g = prob.a.tr_mul(y);
    let mut best = prob.b.dot(y);
    for k in 0..g.len() {
        best -= (prob.lower[k] * g[k]).max(prob.upper[k] * g[k]);
    }
    best / norm
}

enum Factor {
    /// Cholesky of `H + AᵀDA` (n×n).
    Primal(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    /// Cholesky of `D⁻¹ + A H⁻¹ Aᵀ` (m×m).
    Dual(nalgebra::Cholesky<f64, nalgebra::Dyn>),
}

/// Solver for the reduced Newton system
///
/// ```text
/// H Δx − Aᵀ Δy = f
/// A Δx + D⁻¹ Δy = g
/// ```
///
/// with `H` and `D` diagonal and positive.
struct Newton<'a> {
    a: &'a DMatrix<f64>,
    h_inv: DVector<f64>,
    d: DVector<f64>,
    factor: Factor,
}

impl<'a> Newton<'a> {
    fn new(a: &'a DMatrix<f64>, h: &DVector<f64>, d: &DVector<f64>) -> Option<Self> {
        let (m, n) = a.shape();
        let h_inv = h.map(|v| 1.0 / v);
        if 2 * m <= 3 * n {
            // eliminating Δx keeps Δy accurate when some entries of D are huge
            let mut ah = a.clone();
            for (j, mut col) in ah.column_iter_mut().enumerate() {
                col *= h_inv[j].sqrt();
            }
            let aht = ah.transpose();
            let mut k = &ah * &aht;
            for i in 0..m {
                k[(i, i)] += 1.0 / d[i];
            }
            if let Some(f) = k.cholesky() {
                return Some(Newton {
                    a,
                    h_inv,
                    d: d.clone(),
                    factor: Factor::Dual(f),
                });
            }
        }
        let mut sa = a.clone();
        for i in 0..m {
            let w = d[i].sqrt();
            for j in 0..n {
                sa[(i, j)] *= w;
            }
        }
        let sat = sa.transpose();
        let mut mm = &sat * &sa;
        for j in 0..n {
            mm[(j, j)] += h[j];
        }
        mm.cholesky().map(|f| Newton {
            a,
            h_inv,
            d: d.clone(),
            factor: Factor::Primal(f),
        })
    }

    fn solve(&self, f: &DVector<f64>, g: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        match &self.factor {
            Factor::Primal(chol) => {
                let dx = chol.solve(&(f + self.a.tr_mul(&g.component_mul(&self.d))));
                let dy = (g - self.a * &dx).component_mul(&self.d);
                (dx, dy)
            }
            Factor::Dual(chol) => {
                let hf = f.component_mul(&self.h_inv);
                let dy = chol.solve(&(g - self.a * &hf));
                let dx = (f + self.a.tr_mul(&dy)).component_mul(&self.h_inv);
                (dx, dy)
            }
        }
    }
}

/// Largest `α ∈ (0, 1]` keeping `v + α dv ≥ 0` (componentwise).
fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut alpha: f64 = 1.0;
    for (x, d) in v.iter().zip(dv.iter()) {
        if *d < 0.0 {
            alpha = alpha.min(-x / d);
        }
    }
    alpha
}

pub fn solve_qp(prob: &QpProblem, opts: &IpmOptions) -> QpSolution {
    let (m, n) = prob.a.shape();
    let a = &prob.a;
    let (lo, hi) = (&prob.lower, &prob.upper);
    let mut x = DVector::from_fn(n, |k, _| {
        let (l, u) = (lo[k], hi[k]);
        if l.is_finite() && u.is_finite() {
            0.5 * (l + u)
        } else {
            0.0
        }
    });
    // the box must be bounded for the barrier terms below
    debug_assert!(lo.iter().chain(hi.iter()).all(|v| v.is_finite()));
    let ax = a * &x;
    let mut s = DVector::from_fn(m, |i, _| (ax[i] - prob.b[i]).max(1.0));
    let mut y = DVector::from_element(m, 1.0);
    let mut zl = DVector::from_element(n, 1.0);
    let mut zu = DVector::from_element(n, 1.0);

    let b_scale = 1.0 + prob.b.amax();
    let c_scale = 1.0 + prob.c.amax();
    let total = (m + 2 * n) as f64;
    let objective = |x: &DVector<f64>| 0.5 * x.dot(&x.component_mul(&prob.p)) + prob.c.dot(x);

    let pure_feasibility = prob.p.iter().chain(prob.c.iter()).all(|&v| v == 0.0);
    // best iterate so far by the worst scaled residual, for stalls near the end
    let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;
    let fallback = |best: Option<(f64, DVector<f64>, DVector<f64>)>, status: QpStatus, iterations: usize, x: DVector<f64>, y: DVector<f64>| {
        match best {
            Some((merit, bx, by)) if merit <= opts.acceptable_tol => QpSolution {
                status: QpStatus::Optimal,
                objective: objective(&bx),
                x: bx,
                y: by,
                iterations,
            },
            _ => QpSolution {
                status,
                objective: objective(&x),
                x,
                y,
                iterations,
            },
        }
    };

    for iter in 0..opts.max_iter {
        let tl = x.clone() - lo;
        let tu = hi - &x;
        let aty = a.tr_mul(&y);
        let px = x.component_mul(&prob.p);
        let rd = &px + &prob.c - &aty - &zl + &zu;
        let rp = a * &x - &s - &prob.b;
        let mu = (s.dot(&y) + tl.dot(&zl) + tu.dot(&zu)) / total;
        let d_scale = c_scale + aty.amax().max(px.amax());
        let (rp_rel, rd_rel) = (rp.amax() / b_scale, rd.amax() / d_scale);

        // with no objective any primal-feasible interior point is a solution
        let done = if pure_feasibility {
            rp_rel <= opts.feas_tol
        } else {
            rp_rel <= opts.feas_tol && rd_rel <= opts.feas_tol && mu <= opts.gap_tol
        };
        if done {
            return QpSolution {
                status: QpStatus::Optimal,
                objective: objective(&x),
                x,
                y,
                iterations: iter,
            };
        }
        let merit = if pure_feasibility { rp_rel } else { rp_rel.max(rd_rel).max(mu) };
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, x.clone(), y.clone()));
        }
        if m > 0 && infeasibility_certificate(prob, &y) > 1e-9 * b_scale {
            return QpSolution {
                status: QpStatus::Infeasible,
                objective: f64::NAN,
                x,
                y,
                iterations: iter,
            };
        }

        let d = y.component_div(&s);
        let h = &prob.p + zl.component_div(&tl) + zu.component_div(&tu);
        let h_max = h.amax();
        let newton = [0.0, 1e-12, 1e-10, 1e-8]
            .iter()
            .find_map(|&shift| Newton::new(a, &h.add_scalar(shift * (1.0 + h_max)), &d));
        let Some(newton) = newton else {
            return fallback(best, QpStatus::NumericalFailure, iter, x, y);
        };

        // Newton direction for complementarity targets r_sy, r_l, r_u
        let direction = |r_sy: &DVector<f64>, r_l: &DVector<f64>, r_u: &DVector<f64>| {
            let f = -&rd + r_l.component_div(&tl) - r_u.component_div(&tu);
            let g = -&rp + r_sy.component_div(&y);
            let (dx, dy) = newton.solve(&f, &g);
            let ds = a * &dx + &rp;
            let dzl = (r_l - zl.component_mul(&dx)).component_div(&tl);
            let dzu = (r_u + zu.component_mul(&dx)).component_div(&tu);
            (dx, ds, dy, dzl, dzu)
        };
        let step_len = |dx: &DVector<f64>, ds: &DVector<f64>, dy: &DVector<f64>, dzl: &DVector<f64>, dzu: &DVector<f64>| {
            let ndx = -dx;
            max_step(&s, ds)
                .min(max_step(&tl, dx))
                .min(max_step(&tu, &ndx))
                .min(max_step(&y, dy))
                .min(max_step(&zl, dzl))
                .min(max_step(&zu, dzu))
        };

        // predictor
        let (dx_a, ds_a, dy_a, dzl_a, dzu_a) = direction(
            &-s.component_mul(&y),
            &-tl.component_mul(&zl),
            &-tu.component_mul(&zu),
        );
        let alpha_a = step_len(&dx_a, &ds_a, &dy_a, &dzl_a, &dzu_a);
        let mu_aff = ((&s + alpha_a * &ds_a).dot(&(&y + alpha_a * &dy_a))
            + (&tl + alpha_a * &dx_a).dot(&(&zl + alpha_a * &dzl_a))
            + (&tu - alpha_a * &dx_a).dot(&(&zu + alpha_a * &dzu_a)))
            / total;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);
        let target = sigma * mu;

        // corrector
        let r_sy = (s.component_mul(&y) + ds_a.component_mul(&dy_a)).map(|v| target - v);
        let r_l = (tl.component_mul(&zl) + dx_a.component_mul(&dzl_a)).map(|v| target - v);
        let r_u = (tu.component_mul(&zu) - dx_a.component_mul(&dzu_a)).map(|v| target - v);
        let (dx, ds, dy, dzl, dzu) = direction(&r_sy, &r_l, &r_u);
        let alpha = (0.995 * step_len(&dx, &ds, &dy, &dzl, &dzu)).min(1.0);

        x += alpha * &dx;
        s += alpha * &ds;
        y += alpha * &dy;
        zl += alpha * &dzl;
        zu += alpha * &dzu;
        // keep the box strictly interior despite rounding
        for k in 0..n {
            let eps = 1e-14 * (1.0 + (hi[k] - lo[k]));
            x[k] = x[k].clamp(lo[k] + eps, hi[k] - eps);
        }
    }
    fallback(best, QpStatus::IterationLimit, opts.max_iter, x, y)
}
