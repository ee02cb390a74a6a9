//! LASSO-estimated autoregressive benchmark, one linear model per hour.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{self, DatasetError, DayPanels, DayWindow, HOURS_PER_DAY, LEAR_DIM, MAX_LAG};

#[derive(Debug, Error)]
pub enum LearError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{len} rows are too few for a holdout of {holdout}")]
    WindowTooShort { len: usize, holdout: usize },
    #[error("{rows} rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("empty lambda grid")]
    EmptyGrid,
    #[error("row has {got} regressors, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, LearError>;

/// Per-column centering and scaling learned from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    pub means: Vec<f64>,
    /// Zero-variance columns get scale 1 so they stay at zero.
    pub stds: Vec<f64>,
}

impl ColumnScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let p = rows.first().map_or(0, |r| r.len());
        let n = rows.len() as f64;
        let mut means = vec![0.0; p];
        for r in rows {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut stds = vec![0.0; p];
        for r in rows {
            for j in 0..p {
                stds[j] += (r[j] - means[j]).powi(2) / n;
            }
        }
        for s in stds.iter_mut() {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        Self { means, stds }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.means).zip(&self.stds).map(|((v, m), s)| (v - m) / s).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearDesign {
    pub hour: usize,
    /// Standardized regressor rows.
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub days: Vec<usize>,
    pub skipped: Vec<usize>,
    pub scaler: ColumnScaler,
}

/// Regression rows for every day of `window` after its seven lead-in days.
pub fn build_design(panels: &DayPanels, hour: usize, window: DayWindow) -> Result<LearDesign> {
    if hour >= HOURS_PER_DAY {
        return Err(DatasetError::InvalidHour(hour).into());
    }
    if window.len < MAX_LAG + 1 {
        return Err(DatasetError::WindowTooShort { len: window.len, min: MAX_LAG + 1 }.into());
    }
    let first = window.start + MAX_LAG;
    let last = window.start + window.len - 1;
    if last >= panels.n_days() {
        return Err(DatasetError::LagUnavailable { day: last as isize, needed_day: last as isize }.into());
    }
    let mut raw = Vec::new();
    let mut targets = Vec::new();
    let mut days = Vec::new();
    let mut skipped = Vec::new();
    for day in first..=last {
        let target = panels.price.get(day, hour);
        match dataset::lear_regressors(panels, day) {
            Ok(r) if target.is_finite() => {
                raw.push(r);
                targets.push(target);
                days.push(day);
            }
            _ => skipped.push(day),
        }
    }
    let scaler = ColumnScaler::fit(&raw);
    let rows = raw.iter().map(|r| scaler.apply(r)).collect();
    Ok(LearDesign { hour, rows, targets, days, skipped, scaler })
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub theta: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each full coordinate cycle, starting from the initial point.
    pub objective_trace: Vec<f64>,
}

impl LassoFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.theta.iter().zip(row).map(|(t, x)| t * x).sum::<f64>()
    }

    pub fn nonzeros(&self) -> usize {
        self.theta.iter().filter(|t| **t != 0.0).count()
    }
}

struct Centred {
    /// Column-major centred design.
    cols: Vec<Vec<f64>>,
    x_means: Vec<f64>,
    y: Vec<f64>,
    y_mean: f64,
    norms: Vec<f64>,
}

fn centre(rows: &[Vec<f64>], targets: &[f64]) -> Result<Centred> {
    if rows.len() != targets.len() {
        return Err(LearError::LengthMismatch { rows: rows.len(), targets: targets.len() });
    }
    if rows.is_empty() {
        return Err(LearError::WindowTooShort { len: 0, holdout: 0 });
    }
    let n = rows.len() as f64;
    let p = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != p) {
        return Err(LearError::DimensionMismatch { expected: p, got: r.len() });
    }
    let y_mean = targets.iter().sum::<f64>() / n;
    let y = targets.iter().map(|t| t - y_mean).collect();
    let mut cols = Vec::with_capacity(p);
    let mut x_means = Vec::with_capacity(p);
    let mut norms = Vec::with_capacity(p);
    for j in 0..p {
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let col: Vec<f64> = rows.iter().map(|r| r[j] - m).collect();
        norms.push(col.iter().map(|v| v * v).sum::<f64>() / n);
        cols.push(col);
        x_means.push(m);
    }
    Ok(Centred { cols, x_means, y, y_mean, norms })
}

/// `lambda_max = max_j |x_j' y| / n` on centred data; any larger penalty
/// zeroes every coefficient.
pub fn lambda_max(rows: &[Vec<f64>], targets: &[f64]) -> Result<f64> {
    let c = centre(rows, targets)?;
    Ok(lambda_max_centred(&c))
}

fn lambda_max_centred(c: &Centred) -> f64 {
    let n = c.y.len() as f64;
    c.cols
        .iter()
        .map(|col| (col.iter().zip(&c.y).map(|(x, y)| x * y).sum::<f64>() / n).abs())
        .fold(0.0, f64::max)
}

fn objective(residual: &[f64], theta: &[f64], lambda: f64) -> f64 {
    let n = residual.len() as f64;
    residual.iter().map(|r| r * r).sum::<f64>() / (2.0 * n) + lambda * theta.iter().map(|t| t.abs()).sum::<f64>()
}

fn cd_centred(c: &Centred, lambda: f64, tol: f64, max_iter: usize, warm: Option<&[f64]>) -> LassoFit {
    let n = c.y.len();
    let nf = n as f64;
    let p = c.cols.len();
    let mut theta = warm.map_or_else(|| vec![0.0; p], |w| w.to_vec());
    let mut residual = c.y.clone();
    for (j, t) in theta.iter().enumerate() {
        if *t != 0.0 {
            for i in 0..n {
                residual[i] -= t * c.cols[j][i];
            }
        }
    }
    let mut trace = vec![objective(&residual, &theta, lambda)];
    let mut converged = false;
    let mut iterations = 0;
    // full sweeps alternate with sweeps over the nonzero set; only a quiet
    // full sweep ends the loop
    let mut full = true;
    while iterations < max_iter {
        iterations += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            if !full && theta[j] == 0.0 {
                continue;
            }
            if c.norms[j] == 0.0 {
                theta[j] = 0.0;
                continue;
            }
            let col = &c.cols[j];
            let old = theta[j];
            let rho = col.iter().zip(&residual).map(|(x, r)| x * r).sum::<f64>() / nf + c.norms[j] * old;
            let new = soft(rho, lambda) / c.norms[j];
            if new != old {
                let d = new - old;
                for i in 0..n {
                    residual[i] -= d * col[i];
                }
                theta[j] = new;
                max_change = max_change.max(d.abs());
            }
        }
        trace.push(objective(&residual, &theta, lambda));
        if max_change <= tol {
            if full {
                converged = true;
                break;
            }
            full = true;
        } else {
            full = false;
        }
    }
    let intercept = c.y_mean - theta.iter().zip(&c.x_means).map(|(t, m)| t * m).sum::<f64>();
    LassoFit { theta, intercept, lambda, iterations, converged, objective_trace: trace }
}

/// Cyclic coordinate descent on `(1/2n)|y - b - X theta|^2 + lambda |theta|_1`
/// with an unpenalized intercept `b`. Stops once no coefficient moves by more
/// than `tol` in a full cycle; otherwise returns the last iterate flagged.
pub fn coordinate_descent(rows: &[Vec<f64>], targets: &[f64], lambda: f64, tol: f64, max_iter: usize) -> Result<LassoFit> {
    let c = centre(rows, targets)?;
    Ok(cd_centred(&c, lambda, tol, max_iter, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaConfig {
    pub grid_size: usize,
    pub decades: f64,
    pub holdout: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LambdaConfig {
    fn default() -> Self {
        Self { grid_size: 50, decades: 4.0, holdout: 28, tol: 1e-7, max_iter: 10_000 }
    }
}

/// `size` log-spaced values from `lambda_max` down `decades` decades.
pub fn lambda_grid(lambda_max: f64, size: usize, decades: f64) -> Vec<f64> {
    if size == 1 {
        return vec![lambda_max];
    }
    (0..size).map(|k| lambda_max * 10f64.powf(-decades * k as f64 / (size - 1) as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub holdout_rmse: f64,
    pub nonzeros: usize,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection {
    pub lambda: f64,
    pub holdout_rmse: f64,
    pub path: Vec<PathPoint>,
}

/// Fits a warm-started path (largest lambda first) on all but the last
/// `holdout` rows and picks the lowest holdout RMSE; ties go to the larger
/// lambda. `grid = None` uses the default log grid from `lambda_max`.
pub fn select_lambda(rows: &[Vec<f64>], targets: &[f64], grid: Option<&[f64]>, config: &LambdaConfig) -> Result<LambdaSelection> {
    let n = rows.len();
    if config.holdout == 0 || n < config.holdout + 2 {
        return Err(LearError::WindowTooShort { len: n, holdout: config.holdout });
    }
    let split = n - config.holdout;
    let c = centre(&rows[..split], &targets[..split])?;
    let mut lambdas: Vec<f64> = match grid {
        Some(g) => g.to_vec(),
        None => lambda_grid(lambda_max_centred(&c).max(1e-12), config.grid_size, config.decades),
    };
    if lambdas.is_empty() {
        return Err(LearError::EmptyGrid);
    }
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let mut path = Vec::with_capacity(lambdas.len());
    let mut warm: Option<Vec<f64>> = None;
    for &lambda in &lambdas {
        let fit = cd_centred(&c, lambda, config.tol, config.max_iter, warm.as_deref());
        let sq: f64 = (split..n).map(|i| (fit.predict(&rows[i]) - targets[i]).powi(2)).sum();
        path.push(PathPoint {
            lambda,
            holdout_rmse: (sq / config.holdout as f64).sqrt(),
            nonzeros: fit.nonzeros(),
            theta: fit.theta.clone(),
        });
        warm = Some(fit.theta);
    }
    // path is sorted by decreasing lambda, so strict improvement keeps the larger one on ties
    let mut best = 0;
    for (i, pt) in path.iter().enumerate() {
        if pt.holdout_rmse < path[best].holdout_rmse * (1.0 - 1e-12) {
            best = i;
        }
    }
    Ok(LambdaSelection { lambda: path[best].lambda, holdout_rmse: path[best].holdout_rmse, path })
}

/// A fitted per-hour benchmark; predicts from unstandardized regressors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearModel {
    pub hour: usize,
    pub lambda: f64,
    pub fit: LassoFit,
    pub scaler: ColumnScaler,
}

impl LearModel {
    pub fn fit(design: &LearDesign, lambda: f64, config: &LambdaConfig) -> Result<Self> {
        let fit = coordinate_descent(&design.rows, &design.targets, lambda, config.tol, config.max_iter)?;
        Ok(Self { hour: design.hour, lambda, fit, scaler: design.scaler.clone() })
    }

    pub fn predict(&self, raw_regressors: &[f64]) -> Result<f64> {
        if raw_regressors.len() != LEAR_DIM {
            return Err(LearError::DimensionMismatch { expected: LEAR_DIM, got: raw_regressors.len() });
        }
        Ok(self.fit.predict(&self.scaler.apply(raw_regressors)))
    }
}
