//! Epsilon-insensitive support vector regression.
//!
//! The dual is solved in the 2n-variable form used by LIBSVM: one variable
//! for each side of the tube, a single equality constraint, box `[0, C]`.
//! Working pairs are chosen with second-order information.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::sq_dist;

#[derive(Debug, Error, PartialEq)]
pub enum SvrError {
    #[error("need at least {min} training pairs, got {n}")]
    TooFewPoints { n: usize, min: usize },
    #[error("{inputs} inputs but {targets} targets")]
    LengthMismatch { inputs: usize, targets: usize },
    #[error("query dimension {got} does not match training dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("window of {len} points is too short for a holdout of {holdout}")]
    WindowTooShort { len: usize, holdout: usize },
    #[error("empty parameter grid")]
    EmptyGrid,
}

pub type Result<T> = std::result::Result<T, SvrError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SvrKernel {
    SquaredExponential,
    Polynomial,
    Linear,
    Sigmoid,
}

impl SvrKernel {
    pub const ALL: [SvrKernel; 4] = [SvrKernel::SquaredExponential, SvrKernel::Polynomial, SvrKernel::Linear, SvrKernel::Sigmoid];

    pub fn name(self) -> &'static str {
        match self {
            SvrKernel::SquaredExponential => "squared_exponential",
            SvrKernel::Polynomial => "polynomial",
            SvrKernel::Linear => "linear",
            SvrKernel::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s || (s == "rbf" && *k == SvrKernel::SquaredExponential))
    }

    fn uses_coef0(self) -> bool {
        matches!(self, SvrKernel::Polynomial | SvrKernel::Sigmoid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrConfig {
    pub c: f64,
    pub epsilon: f64,
    pub kernel: SvrKernel,
    /// `None` selects `1 / (d * var(X))` from the training inputs.
    pub gamma: Option<f64>,
    pub coef0: f64,
    pub degree: u32,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.01,
            kernel: SvrKernel::SquaredExponential,
            gamma: None,
            coef0: 0.0,
            degree: 2,
            tol: 1e-3,
            max_passes: 200,
        }
    }
}

impl SvrConfig {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(SvrError::InvalidConfig(format!("C must be positive, got {}", self.c)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(SvrError::InvalidConfig(format!("epsilon must be non-negative, got {}", self.epsilon)));
        }
        if self.kernel == SvrKernel::Polynomial && self.degree < 1 {
            return Err(SvrError::InvalidConfig("polynomial degree must be at least 1".into()));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(SvrError::InvalidConfig(format!("gamma must be positive, got {g}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(SvrError::InvalidConfig("tol must be positive".into()));
        }
        Ok(())
    }
}

/// A kernel with every free constant resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrKernelFn {
    pub kind: SvrKernel,
    pub gamma: f64,
    pub coef0: f64,
    pub degree: u32,
}

impl SvrKernelFn {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            SvrKernel::SquaredExponential => (-self.gamma * sq_dist(a, b, a.len())).exp(),
            SvrKernel::Linear => dot(a, b),
            SvrKernel::Polynomial => (self.gamma * dot(a, b) + self.coef0).powi(self.degree as i32),
            SvrKernel::Sigmoid => (self.gamma * dot(a, b) + self.coef0).tanh(),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 / (d * var(X))` over all entries of the input matrix; `1 / d` if constant.
pub fn default_gamma<T: AsRef<[f64]>>(inputs: &[T]) -> f64 {
    let d = inputs[0].as_ref().len().max(1) as f64;
    let count = inputs.len() as f64 * d;
    let mean = inputs.iter().flat_map(|x| x.as_ref().iter()).sum::<f64>() / count;
    let var = inputs.iter().flat_map(|x| x.as_ref().iter()).map(|v| (v - mean).powi(2)).sum::<f64>() / count;
    if var > 0.0 {
        1.0 / (d * var)
    } else {
        1.0 / d
    }
}

fn resolve<T: AsRef<[f64]>>(config: &SvrConfig, inputs: &[T]) -> SvrKernelFn {
    SvrKernelFn {
        kind: config.kernel,
        gamma: config.gamma.unwrap_or_else(|| default_gamma(inputs)),
        coef0: config.coef0,
        degree: config.degree,
    }
}

fn kernel_matrix<T: AsRef<[f64]>>(inputs: &[T], k: &SvrKernelFn) -> DMatrix<f64> {
    let n = inputs.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = k.eval(inputs[i].as_ref(), inputs[j].as_ref());
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    /// `alpha_i - alpha_i*` per training point.
    pub dual_coefs: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub bias: f64,
    pub support_index: Vec<usize>,
    pub train_inputs: Vec<Vec<f64>>,
    pub kernel: SvrKernelFn,
    pub c: f64,
    pub epsilon: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Minimization form `1/2 b'Kb - y'b + eps |b|_1`.
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub kkt_violation: f64,
}

struct SmoOutput {
    beta: Vec<f64>,
    iterations: usize,
    converged: bool,
}

const TAU: f64 = 1e-12;

fn smo(k: &DMatrix<f64>, z: &[f64], c: f64, eps: f64, tol: f64, max_iter: usize) -> SmoOutput {
    let n = z.len();
    let l = 2 * n;
    let idx = |t: usize| if t < n { t } else { t - n };
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let q = |s: usize, t: usize| sign(s) * sign(t) * k[(idx(s), idx(t))];
    let mut a = vec![0.0; l];
    let mut g: Vec<f64> = (0..l).map(|t| if t < n { eps - z[t] } else { eps + z[t - n] }).collect();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        // first index: maximal violation among variables free to move up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..l {
            let y = sign(t);
            let up = if y > 0.0 { a[t] < c } else { a[t] > 0.0 };
            if up && -y * g[t] >= gmax {
                gmax = -y * g[t];
                i = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        if i != usize::MAX {
            let qii = q(i, i);
            for t in 0..l {
                let y = sign(t);
                let low = if y > 0.0 { a[t] > 0.0 } else { a[t] < c };
                if !low {
                    continue;
                }
                let v = -y * g[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let mut quad = qii + q(t, t) - 2.0 * sign(i) * y * q(i, t);
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let score = -b * b / quad;
                    if score <= best {
                        best = score;
                        j = t;
                    }
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (a[i], a[j]);
        let qij = q(i, j);
        if sign(i) != sign(j) {
            let mut quad = q(i, i) + q(j, j) + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-g[i] - g[j]) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if diff > 0.0 {
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if a[j] > c {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (g[i] - g[j]) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if a[j] < 0.0 {
                a[j] = 0.0;
                a[i] = sum;
            }
            if sum > c {
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = sum;
            }
        }
        let (di, dj) = (a[i] - old_i, a[j] - old_j);
        if di != 0.0 || dj != 0.0 {
            for t in 0..l {
                g[t] += q(t, i) * di + q(t, j) * dj;
            }
        }
    }
    let beta = (0..n).map(|i| a[i] - a[i + n]).collect();
    SmoOutput { beta, iterations, converged }
}

/// Minimization-form dual objective for coefficients `beta`.
pub fn dual_objective(k: &DMatrix<f64>, targets: &[f64], beta: &[f64], epsilon: f64) -> f64 {
    let n = beta.len();
    let mut quad = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += k[(i, j)] * beta[j];
        }
        quad += beta[i] * row;
    }
    0.5 * quad - targets.iter().zip(beta).map(|(y, b)| y * b).sum::<f64>() + epsilon * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Kernel-part predictions `sum_j beta_j K(x_j, x_i)` at the training points.
fn training_outputs(k: &DMatrix<f64>, beta: &[f64]) -> Vec<f64> {
    let n = beta.len();
    (0..n).map(|i| (0..n).map(|j| k[(i, j)] * beta[j]).sum()).collect()
}

/// Tolerance used to decide whether a coefficient sits at a bound.
fn bound_tol(c: f64) -> f64 {
    1e-12 * c.max(1.0)
}

/// Intercept from the KKT conditions: average over free support vectors,
/// otherwise the midpoint of the interval the bounded/zero points allow.
pub fn compute_bias(f0: &[f64], targets: &[f64], beta: &[f64], c: f64, epsilon: f64) -> f64 {
    let tol = bound_tol(c);
    let mut sum = 0.0;
    let mut free = 0usize;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..beta.len() {
        let base = targets[i] - f0[i];
        let b = beta[i];
        if b.abs() > tol && b.abs() < c - tol {
            sum += base - b.signum() * epsilon;
            free += 1;
        } else if b.abs() <= tol {
            lo = lo.max(base - epsilon);
            hi = hi.min(base + epsilon);
        } else if b > 0.0 {
            hi = hi.min(base - epsilon);
        } else {
            lo = lo.max(base + epsilon);
        }
    }
    if free > 0 {
        return sum / free as f64;
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => 0.0,
    }
}

/// Largest violation of the optimality conditions at the training points.
pub fn kkt_violation(residuals: &[f64], beta: &[f64], c: f64, epsilon: f64) -> f64 {
    let tol = bound_tol(c);
    let mut worst: f64 = 0.0;
    for (&r, &b) in residuals.iter().zip(beta) {
        let v = if b.abs() <= tol {
            (r.abs() - epsilon).max(0.0)
        } else if b >= c - tol {
            (epsilon - r).max(0.0)
        } else if b <= -(c - tol) {
            (r + epsilon).max(0.0)
        } else if b > 0.0 {
            (r - epsilon).abs()
        } else {
            (r + epsilon).abs()
        };
        worst = worst.max(v);
    }
    worst
}

fn check_pairs<T: AsRef<[f64]>>(inputs: &[T], targets: &[f64]) -> Result<usize> {
    if inputs.len() != targets.len() {
        return Err(SvrError::LengthMismatch { inputs: inputs.len(), targets: targets.len() });
    }
    if inputs.len() < 2 {
        return Err(SvrError::TooFewPoints { n: inputs.len(), min: 2 });
    }
    let d = inputs[0].as_ref().len();
    if let Some(x) = inputs.iter().find(|x| x.as_ref().len() != d) {
        return Err(SvrError::DimensionMismatch { expected: d, got: x.as_ref().len() });
    }
    Ok(d)
}

impl SvrModel {
    /// Solves the dual. Non-convergence within `max_passes * 2n` pair updates
    /// is reported through `converged`, never as an error.
    pub fn solve_dual<T: AsRef<[f64]>>(inputs: &[T], targets: &[f64], config: &SvrConfig) -> Result<Self> {
        config.validate()?;
        check_pairs(inputs, targets)?;
        let kernel = resolve(config, inputs);
        let k = kernel_matrix(inputs, &kernel);
        let n = targets.len();
        let out = smo(&k, targets, config.c, config.epsilon, config.tol, config.max_passes.max(1) * 2 * n);
        let beta = out.beta;
        let f0 = training_outputs(&k, &beta);
        let bias = compute_bias(&f0, targets, &beta, config.c, config.epsilon);
        let residuals: Vec<f64> = (0..n).map(|i| targets[i] - f0[i] - bias).collect();
        let dual = dual_objective(&k, targets, &beta, config.epsilon);
        let quad: f64 = beta.iter().zip(&f0).map(|(b, f)| b * f).sum();
        let primal = 0.5 * quad + config.c * residuals.iter().map(|r| (r.abs() - config.epsilon).max(0.0)).sum::<f64>();
        let tol = bound_tol(config.c);
        Ok(Self {
            alpha: beta.iter().map(|b| b.max(0.0)).collect(),
            alpha_star: beta.iter().map(|b| (-b).max(0.0)).collect(),
            support_index: (0..n).filter(|&i| beta[i].abs() > tol).collect(),
            kkt_violation: kkt_violation(&residuals, &beta, config.c, config.epsilon),
            dual_coefs: beta,
            bias,
            train_inputs: inputs.iter().map(|x| x.as_ref().to_vec()).collect(),
            kernel,
            c: config.c,
            epsilon: config.epsilon,
            converged: out.converged,
            iterations: out.iterations,
            dual_objective: dual,
            duality_gap: primal + dual,
        })
    }

    pub fn dim(&self) -> usize {
        self.train_inputs[0].len()
    }

    /// `f(t) = sum_i beta_i K(t_i, t) + b`.
    pub fn predict<T: AsRef<[f64]>>(&self, queries: &[T]) -> Result<Vec<f64>> {
        let d = self.dim();
        queries
            .iter()
            .map(|q| {
                let q = q.as_ref();
                if q.len() != d {
                    return Err(SvrError::DimensionMismatch { expected: d, got: q.len() });
                }
                Ok(self.support_index.iter().map(|&i| self.dual_coefs[i] * self.kernel.eval(&self.train_inputs[i], q)).sum::<f64>()
                    + self.bias)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrGrid {
    pub kernels: Vec<SvrKernel>,
    pub epsilons: Vec<f64>,
    pub cs: Vec<f64>,
    /// Only applied to the polynomial and sigmoid kernels.
    pub coef0s: Vec<f64>,
}

impl Default for SvrGrid {
    fn default() -> Self {
        Self {
            kernels: SvrKernel::ALL.to_vec(),
            epsilons: vec![0.001, 0.01, 0.1],
            cs: vec![0.1, 1.0, 10.0],
            coef0s: vec![0.0, 1.0, 10.0],
        }
    }
}

impl SvrGrid {
    pub fn single(config: &SvrConfig) -> Self {
        Self {
            kernels: vec![config.kernel],
            epsilons: vec![config.epsilon],
            cs: vec![config.c],
            coef0s: vec![config.coef0],
        }
    }

    /// Every configuration in enumeration order, filled in from `base`.
    pub fn cells(&self, base: &SvrConfig) -> Vec<SvrConfig> {
        let mut out = Vec::new();
        for &kernel in &self.kernels {
            let coefs: Vec<f64> = if kernel.uses_coef0() { self.coef0s.clone() } else { vec![base.coef0] };
            for &coef0 in &coefs {
                for &c in &self.cs {
                    for &epsilon in &self.epsilons {
                        out.push(SvrConfig { kernel, coef0, c, epsilon, ..*base });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: SvrConfig,
    pub best_rmse: f64,
    pub cells: Vec<(SvrConfig, f64)>,
}

fn prefer(a: &(SvrConfig, f64), b: &(SvrConfig, f64)) -> bool {
    let (ca, ra) = a;
    let (cb, rb) = b;
    let scale = ra.abs().max(rb.abs()).max(1e-300);
    if (ra - rb).abs() > 1e-12 * scale {
        return ra < rb;
    }
    if ca.c != cb.c {
        return ca.c < cb.c;
    }
    ca.epsilon > cb.epsilon
}

/// Exhaustive search scored by RMSE on the last `holdout` points. Ties go
/// to the smaller `C`, then the larger `epsilon`, then enumeration order.
pub fn grid_search<T: AsRef<[f64]> + Sync>(
    inputs: &[T],
    targets: &[f64],
    holdout: usize,
    grid: &SvrGrid,
    base: &SvrConfig,
) -> Result<GridResult> {
    check_pairs(inputs, targets)?;
    let n = inputs.len();
    if holdout == 0 || n < holdout + 2 {
        return Err(SvrError::WindowTooShort { len: n, holdout });
    }
    let cells = grid.cells(base);
    if cells.is_empty() {
        return Err(SvrError::EmptyGrid);
    }
    let split = n - holdout;
    let (train_x, test_x) = inputs.split_at(split);
    let (train_y, test_y) = targets.split_at(split);
    // every cell shares the default gamma of the fitting part
    let gamma = base.gamma.unwrap_or_else(|| default_gamma(train_x));
    let scored: Vec<(SvrConfig, f64)> = cells
        .into_par_iter()
        .map(|cell| {
            let cell = SvrConfig { gamma: Some(gamma), ..cell };
            let rmse = SvrModel::solve_dual(train_x, train_y, &cell)
                .and_then(|m| m.predict(test_x))
                .map(|p| (p.iter().zip(test_y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / holdout as f64).sqrt())
                .ok()
                .filter(|r| r.is_finite())
                .unwrap_or(f64::INFINITY);
            (SvrConfig { gamma: base.gamma, ..cell }, rmse)
        })
        .collect();
    let mut best = 0;
    for i in 1..scored.len() {
        if prefer(&scored[i], &scored[best]) {
            best = i;
        }
    }
    Ok(GridResult { best: scored[best].0, best_rmse: scored[best].1, cells: scored })
}
