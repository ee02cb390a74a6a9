//! Box-constrained limited-memory BFGS with a projected Armijo line search.
//!
//! Used for the GP hyperparameter MLE. Every accepted step strictly decreases
//! the objective, which callers rely on when they log the trace.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Stop when the projected gradient's infinity norm falls below this.
    pub grad_tol: f64,
    /// Stop when an accepted step improves `f` by less than `f_tol * max(1, |f|)`.
    pub f_tol: f64,
    pub memory: usize,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-6,
            f_tol: 1e-12,
            memory: 8,
            armijo: 1e-4,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

fn projected_grad_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..x.len() {
        let stuck = (x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0);
        if !stuck {
            m = m.max(g[i].abs());
        }
    }
    m
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` over the box `[lower, upper]`. The objective returns `None`
/// where it is undefined; the line search treats that as an infinite value.
/// Returns `None` only when the starting point itself is undefined.
pub fn minimize_box<F>(mut f: F, x0: &[f64], lower: &[f64], upper: &[f64], opts: &MinimizeOptions) -> Option<MinimizeResult>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() {
        return None;
    }
    let mut evaluations = 1;
    let mut trace = vec![fx];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if projected_grad_norm(&x, &g, lower, upper) <= opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;

        // variables pinned at a bound with the gradient pointing outward
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)))
            .collect();
        let mut q: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            for i in 0..n {
                q[i] -= a * y[i];
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            for v in q.iter_mut() {
                *v *= gamma;
            }
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for i in 0..n {
                q[i] += (a - b) * s[i];
            }
        }
        let mut d: Vec<f64> = (0..n).map(|i| if free[i] { -q[i] } else { 0.0 }).collect();
        if dot(&d, &g) >= 0.0 {
            history.clear();
            d = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
        }
        if history.is_empty() {
            // keep the first, gradient-scaled step in a sane range
            let norm = dot(&d, &d).sqrt();
            if norm > 1.0 {
                for v in d.iter_mut() {
                    *v /= norm;
                }
            }
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let mut xt: Vec<f64> = (0..n).map(|i| x[i] + t * d[i]).collect();
            project(&mut xt, lower, upper);
            let step: Vec<f64> = (0..n).map(|i| xt[i] - x[i]).collect();
            let decrease = dot(&g, &step);
            if decrease >= 0.0 {
                t *= 0.5;
                continue;
            }
            evaluations += 1;
            if let Some((ft, gt)) = f(&xt) {
                if ft.is_finite() && ft <= fx + opts.armijo * decrease && ft < fx {
                    accepted = Some((xt, ft, gt, step));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xt, ft, gt, step)) = accepted else {
            break;
        };
        let y: Vec<f64> = (0..n).map(|i| gt[i] - g[i]).collect();
        let sy = dot(&step, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&step, &step).sqrt() && sy > 0.0 {
            history.push_back((step, y, 1.0 / sy));
            if history.len() > opts.memory {
                history.pop_front();
            }
        }
        let improvement = fx - ft;
        x = xt;
        fx = ft;
        g = gt;
        trace.push(fx);
        if improvement <= opts.f_tol * fx.abs().max(1.0) {
            converged = projected_grad_norm(&x, &g, lower, upper) <= opts.grad_tol.max(1e-4);
            break;
        }
    }
    if !converged && projected_grad_norm(&x, &g, lower, upper) <= opts.grad_tol {
        converged = true;
    }
    Some(MinimizeResult {
        x,
        f: fx,
        grad: g,
        iterations,
        evaluations,
        converged,
        trace,
    })
}
