#![allow(dead_code)]

use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};

use kernelcast::backtest::{run_on_panels, BacktestOutput};
use kernelcast::config::BacktestConfig;
use kernelcast::dataset::{DayPanels, HourlyPanel};
use kernelcast::svr::{SvrGrid, SvrKernel};
use kernelcast::synthetic::{generate, SyntheticConfig};

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn synthetic_panels(days: usize, seed: u64) -> DayPanels {
    let recs = generate(&SyntheticConfig::new(date(2022, 1, 1), days, seed));
    HourlyPanel::from_records(&recs).unwrap().to_day_panels()
}

/// Cheap settings for debug-mode backtests: short window, tiny searches.
pub fn small_config(panels: &DayPanels, first: usize, days: usize) -> BacktestConfig {
    let mut cfg = BacktestConfig::new("unused.csv", panels.date_of(first), panels.date_of(first + days - 1));
    cfg.window_days = 30;
    cfg.transform.signed_log = [false; 3];
    cfg.gpr.restarts = 1;
    cfg.gpr.max_iter = 40;
    cfg.svr_grid = Some(SvrGrid {
        kernels: vec![SvrKernel::SquaredExponential],
        epsilons: vec![0.05],
        cs: vec![1.0, 10.0],
        coef0s: vec![0.0],
    });
    cfg.svr_holdout_days = 7;
    cfg.lear.grid_size = 8;
    cfg.lear.holdout = 7;
    cfg.lear.max_iter = 2000;
    cfg.lear.tol = 1e-6;
    cfg.conformal.num_candidates = 200;
    cfg.conformal.bootstrap_reps = 8;
    cfg.threads = Some(2);
    cfg
}

pub fn run(panels: &DayPanels, cfg: &BacktestConfig) -> BacktestOutput {
    run_on_panels(panels, cfg).unwrap()
}

pub fn emit(out: &BacktestOutput, dir: &Path) {
    kernelcast::report::emit_report(out, &[], dir).unwrap();
}

/// Composite kernel written out independently of the library.
pub fn composite(a: &[f64], b: &[f64], p: [f64; 5]) -> f64 {
    let [s_se, l_se, s_rq, l_rq, alpha] = p;
    let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    s_se * s_se * (-r2 / (2.0 * l_se * l_se)).exp() + s_rq * s_rq * (1.0 + r2 / (2.0 * alpha * l_rq * l_rq)).powf(-alpha)
}

/// Posterior mean and latent variance by explicit inversion.
pub fn dense_gp(x: &[Vec<f64>], y: &[f64], p: [f64; 5], noise: f64, q: &[f64]) -> (f64, f64) {
    let n = x.len();
    let m = y.iter().sum::<f64>() / n as f64;
    let k = DMatrix::from_fn(n, n, |i, j| composite(&x[i], &x[j], p) + if i == j { noise * noise } else { 0.0 });
    let inv = k.try_inverse().unwrap();
    let ks = DVector::from_fn(n, |i, _| composite(&x[i], q, p));
    let yc = DVector::from_fn(n, |i, _| y[i] - m);
    let mean = m + (ks.transpose() * &inv * yc)[0];
    let var = composite(q, q, p) - (ks.transpose() * &inv * &ks)[0];
    (mean, var)
}

/// Solves the epsilon-SVR dual `min 1/2 b'Kb - y'b + eps|b|_1`, `sum b = 0`,
/// `|b_i| <= C` through a primal-dual interior-point method on the split
/// variables `b = a - a*`. Returns `(b, objective)`.
pub fn svr_qp_oracle(k: &DMatrix<f64>, y: &[f64], c: f64, eps: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    let m = 2 * n;
    let q = DMatrix::from_fn(m, m, |i, j| {
        let s = if (i < n) == (j < n) { 1.0 } else { -1.0 };
        s * k[(i % n, j % n)]
    });
    let lin = DVector::from_fn(m, |i, _| if i < n { eps - y[i] } else { eps + y[i - n] });
    let a = DVector::from_fn(m, |i, _| if i < n { 1.0 } else { -1.0 });
    let mut x = DVector::from_element(m, 0.5 * c);
    let mut z = DVector::from_element(m, 1.0);
    let mut w = DVector::from_element(m, 1.0);
    let mut lam = 0.0;
    for _ in 0..200 {
        let s = x.map(|v| c - v);
        let gap = x.dot(&z) + s.dot(&w);
        let rd = &q * &x + &lin - &a * lam - &z + &w;
        let rp = -a.dot(&x);
        if gap < 1e-15 * m as f64 && rd.amax() < 1e-13 && rp.abs() < 1e-13 {
            break;
        }
        let mu = 0.1 * gap / (2 * m) as f64;
        let mut h = DMatrix::zeros(m + 1, m + 1);
        let mut rhs = DVector::zeros(m + 1);
        for i in 0..m {
            for j in 0..m {
                h[(i, j)] = q[(i, j)];
            }
            h[(i, i)] += z[i] / x[i] + w[i] / s[i];
            h[(i, m)] = -a[i];
            h[(m, i)] = a[i];
            rhs[i] = -rd[i] + mu / x[i] - z[i] - mu / s[i] + w[i];
        }
        rhs[m] = rp;
        let step = h.lu().solve(&rhs).unwrap();
        let dx = step.rows(0, m).into_owned();
        let dlam = step[m];
        let dz = DVector::from_fn(m, |i, _| (mu - x[i] * z[i] - z[i] * dx[i]) / x[i]);
        let dw = DVector::from_fn(m, |i, _| (mu - s[i] * w[i] + w[i] * dx[i]) / s[i]);
        let mut t: f64 = 1.0;
        for i in 0..m {
            for (v, d) in [(x[i], dx[i]), (s[i], -dx[i]), (z[i], dz[i]), (w[i], dw[i])] {
                if d < 0.0 {
                    t = t.min(-0.99 * v / d);
                }
            }
        }
        x += dx * t;
        z += dz * t;
        w += dw * t;
        lam += dlam * t;
    }
    let beta: Vec<f64> = (0..n).map(|i| x[i] - x[i + n]).collect();
    let kb = k * DVector::from_column_slice(&beta);
    let obj = 0.5 * beta.iter().zip(kb.iter()).map(|(b, v)| b * v).sum::<f64>()
        - y.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()
        + eps * beta.iter().map(|b| b.abs()).sum::<f64>();
    (beta, obj)
}
