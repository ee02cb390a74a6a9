//! Gaussian process regression with a zero-mean prior on centered targets.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::kernels::{
    self, cholesky_with_jitter, cross_covariance, entry_param_gradient, gram_from_distances, KernelError, KernelKind,
    KernelParams, ParamId, PeriodicParams, SquaredDistances,
};
use crate::optim::{minimize_box, MinimizeOptions};

#[derive(Debug, Error, PartialEq)]
pub enum GprError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("need at least {min} training pairs, got {n}")]
    TooFewPoints { n: usize, min: usize },
    #[error("{inputs} inputs but {targets} targets")]
    LengthMismatch { inputs: usize, targets: usize },
    #[error("query dimension {got} does not match training dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("all {restarts} optimizer restarts failed")]
    AllRestartsFailed { restarts: usize },
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
}

pub type Result<T> = std::result::Result<T, GprError>;

pub const MIN_FIT_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GprConfig {
    pub kind: KernelKind,
    pub restarts: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub f_tol: f64,
    /// Lower bound on the noise standard deviation, relative to the target std.
    pub noise_floor: f64,
    pub alpha: f64,
}

impl Default for GprConfig {
    fn default() -> Self {
        Self {
            kind: KernelKind::Sum,
            restarts: 5,
            max_iter: 200,
            grad_tol: 1e-6,
            f_tol: 1e-10,
            noise_floor: 1e-4,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub lml: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub restarts_succeeded: usize,
    /// LML after each accepted optimizer step of the winning restart.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GprModel {
    pub train_inputs: Vec<Vec<f64>>,
    pub train_targets: Vec<f64>,
    pub params: KernelParams,
    pub kind: KernelKind,
    /// Lower Cholesky factor of `K + sigma_n^2 I` (plus `jitter` on the diagonal).
    pub factor: DMatrix<f64>,
    pub weights: DVector<f64>,
    pub target_mean: f64,
    pub jitter: f64,
    pub fit_info: Option<FitInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GprPrediction {
    pub mean: f64,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Two-sided standard normal quantile for confidence `1 - alpha`.
pub fn z_value(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(GprError::InvalidAlpha(alpha));
    }
    Ok(Normal::standard().inverse_cdf(1.0 - alpha / 2.0))
}

fn noisy_gram(dist: &SquaredDistances, params: &KernelParams, kind: KernelKind) -> Result<DMatrix<f64>> {
    let mut a = gram_from_distances(dist, params, kind)?;
    let noise = params.sigma_n().powi(2);
    for i in 0..a.nrows() {
        a[(i, i)] += noise;
    }
    Ok(a)
}

struct Evaluation {
    lml: f64,
    grad: Vec<f64>,
}

fn evaluate(dist: &SquaredDistances, y: &DVector<f64>, params: &KernelParams, kind: KernelKind, ids: &[ParamId], with_grad: bool) -> Result<Evaluation> {
    let n = y.len();
    let a = noisy_gram(dist, params, kind)?;
    let (chol, _) = cholesky_with_jitter(&a)?;
    let w = chol.solve(y);
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().take(n).map(|v| v.ln()).sum::<f64>();
    let lml = -0.5 * y.dot(&w) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    if !with_grad {
        return Ok(Evaluation { lml, grad: Vec::new() });
    }
    let inv = chol.inverse();
    let mut grad = vec![0.0; ids.len()];
    let mut buf = vec![0.0; ids.len()];
    for i in 0..n {
        for j in 0..=i {
            let coef = w[i] * w[j] - inv[(i, j)];
            let weight = if i == j { 0.5 * coef } else { coef };
            entry_param_gradient(dist.get(i, j), params, kind, ids, &mut buf);
            for (g, b) in grad.iter_mut().zip(&buf) {
                *g += weight * b;
            }
        }
    }
    if let Some(pos) = ids.iter().position(|id| *id == ParamId::SigmaN) {
        let trace: f64 = (0..n).map(|i| w[i] * w[i] - inv[(i, i)]).sum();
        grad[pos] = 0.5 * trace * 2.0 * params.sigma_n().powi(2);
    }
    Ok(Evaluation { lml, grad })
}

fn check_pairs<T: AsRef<[f64]>>(inputs: &[T], targets: &[f64]) -> Result<()> {
    if inputs.len() != targets.len() {
        return Err(GprError::LengthMismatch { inputs: inputs.len(), targets: targets.len() });
    }
    if inputs.is_empty() {
        return Err(GprError::TooFewPoints { n: 0, min: 1 });
    }
    Ok(())
}

/// `log p(y | X, theta)` for targets taken exactly as given (no centering).
pub fn log_marginal_likelihood<T: AsRef<[f64]>>(inputs: &[T], targets: &[f64], params: &KernelParams, kind: KernelKind) -> Result<f64> {
    check_pairs(inputs, targets)?;
    let dist = SquaredDistances::new(inputs)?;
    let y = DVector::from_column_slice(targets);
    Ok(evaluate(&dist, &y, params, kind, &[], false)?.lml)
}

/// Gradient of the LML with respect to each active log-parameter of `kind`.
pub fn lml_gradient<T: AsRef<[f64]>>(inputs: &[T], targets: &[f64], params: &KernelParams, kind: KernelKind) -> Result<Vec<(ParamId, f64)>> {
    check_pairs(inputs, targets)?;
    if kind == KernelKind::SumWithLocalPeriodic && params.periodic.is_none() {
        return Err(KernelError::PeriodicParamsMissing.into());
    }
    let dist = SquaredDistances::new(inputs)?;
    let y = DVector::from_column_slice(targets);
    let ids = kind.active_params();
    let e = evaluate(&dist, &y, params, kind, &ids, true)?;
    Ok(ids.into_iter().zip(e.grad).collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

struct Scales {
    amplitude: f64,
    length: f64,
}

fn bounds(id: ParamId, s: &Scales, noise_floor: f64) -> (f64, f64) {
    let (lo, hi) = match id {
        ParamId::SigmaSe | ParamId::SigmaRq | ParamId::AmplitudeLp => (1e-3 * s.amplitude, 1e2 * s.amplitude),
        ParamId::EllSe | ParamId::EllRq | ParamId::SigmaLp | ParamId::Period => (1e-3 * s.length, 1e3 * s.length),
        ParamId::AlphaRq => (1e-3, 1e4),
        ParamId::EllLp => (1e-2, 1e2),
        ParamId::SigmaN => (noise_floor * s.amplitude, 1e1 * s.amplitude),
    };
    (lo.ln(), hi.ln())
}

fn centre(id: ParamId, s: &Scales) -> f64 {
    match id {
        ParamId::SigmaSe | ParamId::SigmaRq | ParamId::AmplitudeLp => s.amplitude.ln(),
        ParamId::EllSe | ParamId::EllRq | ParamId::SigmaLp | ParamId::Period => s.length.ln(),
        ParamId::AlphaRq | ParamId::EllLp => 0.0,
        ParamId::SigmaN => (0.1 * s.amplitude).ln(),
    }
}

fn base_params() -> KernelParams {
    KernelParams {
        log_sigma_se: 0.0,
        log_ell_se: 0.0,
        log_sigma_rq: 0.0,
        log_ell_rq: 0.0,
        log_alpha_rq: 0.0,
        log_sigma_n: 0.0,
        periodic: None,
    }
}

impl GprModel {
    /// Conditions the GP on data with fixed hyperparameters.
    pub fn condition<T: AsRef<[f64]>>(inputs: &[T], targets: &[f64], params: KernelParams, kind: KernelKind) -> Result<Self> {
        check_pairs(inputs, targets)?;
        let dist = SquaredDistances::new(inputs)?;
        Self::condition_with(&dist, inputs, targets, params, kind, None)
    }

    fn condition_with<T: AsRef<[f64]>>(
        dist: &SquaredDistances,
        inputs: &[T],
        targets: &[f64],
        params: KernelParams,
        kind: KernelKind,
        fit_info: Option<FitInfo>,
    ) -> Result<Self> {
        if kind == KernelKind::SumWithLocalPeriodic && params.periodic.is_none() {
            return Err(KernelError::PeriodicParamsMissing.into());
        }
        let target_mean = mean(targets);
        let y = DVector::from_iterator(targets.len(), targets.iter().map(|t| t - target_mean));
        let a = noisy_gram(dist, &params, kind)?;
        let (chol, jitter) = cholesky_with_jitter(&a)?;
        let weights = chol.solve(&y);
        Ok(Self {
            train_inputs: inputs.iter().map(|x| x.as_ref().to_vec()).collect(),
            train_targets: targets.to_vec(),
            params,
            kind,
            factor: chol.l(),
            weights,
            target_mean,
            jitter,
            fit_info,
        })
    }

    /// Maximum-likelihood fit from `config.restarts` starting points; the
    /// first start sits at the centre of the scaled initialization range and
    /// the rest are drawn uniformly from it.
    pub fn fit<T: AsRef<[f64]>>(inputs: &[T], targets: &[f64], config: &GprConfig, seed: u64) -> Result<Self> {
        Self::fit_from(inputs, targets, config, seed, None)
    }

    /// Like [`GprModel::fit`], with an optional warm start used as the first
    /// restart (typically last week's hyperparameters).
    pub fn fit_from<T: AsRef<[f64]>>(
        inputs: &[T],
        targets: &[f64],
        config: &GprConfig,
        seed: u64,
        warm: Option<&KernelParams>,
    ) -> Result<Self> {
        check_pairs(inputs, targets)?;
        if inputs.len() < MIN_FIT_POINTS {
            return Err(GprError::TooFewPoints { n: inputs.len(), min: MIN_FIT_POINTS });
        }
        let dist = SquaredDistances::new(inputs)?;
        let target_mean = mean(targets);
        let y = DVector::from_iterator(targets.len(), targets.iter().map(|t| t - target_mean));
        let sd = (y.norm_squared() / y.len() as f64).sqrt();
        let scales = Scales {
            amplitude: if sd > 0.0 { sd } else { 1.0 },
            length: dist.median_distance(),
        };
        let kind = config.kind;
        let ids = kind.active_params();
        let (lower, upper): (Vec<f64>, Vec<f64>) = ids.iter().map(|&id| bounds(id, &scales, config.noise_floor)).unzip();

        let mut template = base_params();
        if kind == KernelKind::SumWithLocalPeriodic {
            template.periodic = Some(PeriodicParams { log_period: 0.0, log_ell: 0.0, log_sigma: 0.0, log_amplitude: 0.0 });
        }
        let to_params = |x: &[f64]| {
            let mut p = template;
            for (&id, &v) in ids.iter().zip(x) {
                p.set(id, v);
            }
            p
        };

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spread = 10f64.ln();
        let options = MinimizeOptions {
            max_iter: config.max_iter,
            grad_tol: config.grad_tol,
            f_tol: config.f_tol,
            ..Default::default()
        };
        let mut best: Option<(f64, Vec<f64>, crate::optim::MinimizeResult)> = None;
        let mut succeeded = 0;
        for restart in 0..config.restarts.max(1) {
            let x0: Vec<f64> = match (restart, warm) {
                (0, Some(w)) => ids.iter().map(|&id| w.get(id)).collect(),
                (0, None) => ids.iter().map(|&id| centre(id, &scales)).collect(),
                _ => ids
                    .iter()
                    .map(|&id| centre(id, &scales) + rng.random_range(-spread..spread))
                    .collect(),
            };
            let objective = |x: &[f64]| {
                let p = to_params(x);
                evaluate(&dist, &y, &p, kind, &ids, true)
                    .ok()
                    .map(|e| (-e.lml, e.grad.iter().map(|g| -g).collect()))
            };
            let Some(result) = minimize_box(objective, &x0, &lower, &upper, &options) else {
                continue;
            };
            succeeded += 1;
            let lml = -result.f;
            if best.as_ref().is_none_or(|(b, _, _)| lml > *b) {
                best = Some((lml, result.x.clone(), result));
            }
        }
        let Some((lml, x, result)) = best else {
            return Err(GprError::AllRestartsFailed { restarts: config.restarts.max(1) });
        };
        let info = FitInfo {
            lml,
            iterations: result.iterations,
            evaluations: result.evaluations,
            converged: result.converged,
            restarts_succeeded: succeeded,
            trace: result.trace.iter().map(|f| -f).collect(),
        };
        Self::condition_with(&dist, inputs, targets, to_params(&x), kind, Some(info))
    }

    pub fn n(&self) -> usize {
        self.train_targets.len()
    }

    pub fn dim(&self) -> usize {
        self.train_inputs[0].len()
    }

    /// LML of the centered training targets under the stored parameters.
    pub fn log_marginal_likelihood(&self) -> Result<f64> {
        let centred: Vec<f64> = self.train_targets.iter().map(|t| t - self.target_mean).collect();
        log_marginal_likelihood(&self.train_inputs, &centred, &self.params, self.kind)
    }

    pub fn lml_gradient(&self) -> Result<Vec<(ParamId, f64)>> {
        let centred: Vec<f64> = self.train_targets.iter().map(|t| t - self.target_mean).collect();
        lml_gradient(&self.train_inputs, &centred, &self.params, self.kind)
    }

    /// Posterior mean, latent variance and the `1 - alpha` interval.
    pub fn predict<T: AsRef<[f64]>>(&self, queries: &[T], alpha: f64) -> Result<Vec<GprPrediction>> {
        let z = z_value(alpha)?;
        let dim = self.dim();
        if let Some(q) = queries.iter().find(|q| q.as_ref().len() != dim) {
            return Err(GprError::DimensionMismatch { expected: dim, got: q.as_ref().len() });
        }
        if queries.is_empty() {
            return Ok(Vec::new());
        }
        let kstar = cross_covariance(queries, &self.train_inputs, &self.params, self.kind)?;
        let prior = kernels::prior_variance(&self.params, self.kind)?;
        let means = &kstar * &self.weights;
        let kt = kstar.transpose();
        let v = self
            .factor
            .solve_lower_triangular(&kt)
            .expect("Cholesky factor has a positive diagonal");
        Ok((0..queries.len())
            .map(|i| {
                let mean = self.target_mean + means[i];
                let variance = (prior - v.column(i).norm_squared()).max(0.0);
                let half = z * variance.sqrt();
                GprPrediction { mean, variance, lower: mean - half, upper: mean + half }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand_distr::StandardNormal;

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        (x, y)
    }

    fn dense_lml(x: &[Vec<f64>], y: &[f64], p: &KernelParams, kind: KernelKind) -> f64 {
        let mut a = kernels::gram(x, p, kind).unwrap().values;
        for i in 0..y.len() {
            a[(i, i)] += p.sigma_n().powi(2);
        }
        let inv = a.clone().try_inverse().unwrap();
        let yv = DVector::from_column_slice(y);
        let det = a.determinant();
        -0.5 * (yv.transpose() * inv * &yv)[0] - 0.5 * det.ln() - 0.5 * y.len() as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    #[test]
    fn lml_single_point() {
        let p = KernelParams::new(0.6, 1.0, 0.8, 1.0, 1.0, 0.0).unwrap();
        let v = log_marginal_likelihood(&[vec![0.0]], &[0.0], &p, KernelKind::Sum).unwrap();
        assert_relative_eq!(v, -0.918_938_533_204_672_7, epsilon = 1e-12);
    }

    #[test]
    fn lml_matches_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (x, y) = random_problem(&mut rng, 15, 3);
            let p = KernelParams::new(1.0, 1.2, 0.5, 0.8, 1.5, 0.3).unwrap();
            let got = log_marginal_likelihood(&x, &y, &p, KernelKind::Sum).unwrap();
            assert!((got - dense_lml(&x, &y, &p, KernelKind::Sum)).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_targets_changes_quadratic_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (x, y) = random_problem(&mut rng, 10, 2);
        let p = KernelParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 0.2).unwrap();
        let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        let zero = vec![0.0; 10];
        let base = log_marginal_likelihood(&x, &zero, &p, KernelKind::Sum).unwrap();
        let q1 = log_marginal_likelihood(&x, &y, &p, KernelKind::Sum).unwrap() - base;
        let q2 = log_marginal_likelihood(&x, &y2, &p, KernelKind::Sum).unwrap() - base;
        assert_relative_eq!(q2, 4.0 * q1, max_relative = 1e-10);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (x, y) = random_problem(&mut rng, 12, 3);
            let p = KernelParams::new(
                rng.random_range(0.5..1.5),
                rng.random_range(0.5..2.0),
                rng.random_range(0.5..1.5),
                rng.random_range(0.5..2.0),
                rng.random_range(0.5..3.0),
                rng.random_range(0.1..0.5),
            )
            .unwrap();
            for (id, g) in lml_gradient(&x, &y, &p, KernelKind::Sum).unwrap() {
                let h = 1e-5;
                let mut a = p;
                a.set(id, p.get(id) + h);
                let mut b = p;
                b.set(id, p.get(id) - h);
                let fd = (log_marginal_likelihood(&x, &y, &a, KernelKind::Sum).unwrap()
                    - log_marginal_likelihood(&x, &y, &b, KernelKind::Sum).unwrap())
                    / (2.0 * h);
                assert!((g - fd).abs() <= 1e-4 * g.abs().max(1e-3), "{id:?}: {g} vs {fd}");
            }
        }
    }

    #[test]
    fn noise_gradient_vanishes_for_noiseless_interpolation() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.7]).collect();
        let y: Vec<f64> = x.iter().map(|v| v[0].sin()).collect();
        let p = KernelParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 1e-6).unwrap();
        let g = lml_gradient(&x, &y, &p, KernelKind::SquaredExponential).unwrap();
        let noise = g.iter().find(|(id, _)| *id == ParamId::SigmaN).unwrap().1;
        assert!(noise.abs() < 1e-6, "{noise}");
    }

    fn sample_prior(rng: &mut ChaCha8Rng, x: &[Vec<f64>], p: &KernelParams, kind: KernelKind, noise: bool) -> Vec<f64> {
        let mut k = kernels::gram(x, p, kind).unwrap().jittered();
        for i in 0..x.len() {
            k[(i, i)] += if noise { p.sigma_n().powi(2) } else { 0.0 } + 1e-10;
        }
        let l = k.cholesky().unwrap().l();
        let z = DVector::from_iterator(x.len(), (0..x.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        (l * z).iter().copied().collect()
    }

    #[test]
    fn recovers_length_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let x: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.random_range(0.0..30.0)]).collect();
        let truth = KernelParams::new(1.0, 2.0, 1.0, 1.0, 1.0, 0.1).unwrap();
        let y = sample_prior(&mut rng, &x, &truth, KernelKind::SquaredExponential, true);
        let config = GprConfig { kind: KernelKind::SquaredExponential, ..Default::default() };
        let m = GprModel::fit(&x, &y, &config, 1).unwrap();
        let ell = m.params.ell_se();
        assert!((1.4..=2.6).contains(&ell), "{ell}");
        let info = m.fit_info.as_ref().unwrap();
        assert!(info.trace.windows(2).all(|w| w[1] >= w[0]));
        let gnorm = m.lml_gradient().unwrap().iter().map(|(_, g)| g.abs()).fold(0.0, f64::max);
        assert!(gnorm <= 1e-5, "{gnorm}");
    }

    #[test]
    fn fit_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (x, y) = random_problem(&mut rng, 20, 2);
        let config = GprConfig { restarts: 1, ..Default::default() };
        let a = GprModel::fit(&x, &y, &config, 42).unwrap();
        let b = GprModel::fit(&x, &y, &config, 42).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(
            GprModel::fit(&x, &y, &GprConfig { restarts: 0, ..config }, 42).unwrap().params,
            a.params
        );
    }

    #[test]
    fn conflicting_duplicates_keep_noise() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..6 {
            x.push(vec![i as f64]);
            y.push(1.0);
            x.push(vec![i as f64]);
            y.push(-1.0);
        }
        let m = GprModel::fit(&x, &y, &GprConfig::default(), 0).unwrap();
        assert!(m.params.sigma_n() > 0.5, "{}", m.params.sigma_n());
    }

    #[test]
    fn too_few_points() {
        let x = vec![vec![0.0]; 7];
        assert_eq!(
            GprModel::fit(&x, &[0.0; 7], &GprConfig::default(), 0).unwrap_err(),
            GprError::TooFewPoints { n: 7, min: 8 }
        );
    }

    #[test]
    fn interpolates_and_reverts_to_prior() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i * i) as f64 / 10.0]).collect();
        let y: Vec<f64> = (0..8).map(|i| (i as f64).cos() + 3.0).collect();
        let p = KernelParams::new(1.0, 1.5, 0.5, 1.0, 2.0, 1e-8).unwrap();
        let m = GprModel::condition(&x, &y, p, KernelKind::Sum).unwrap();
        let pred = m.predict(&x[3..4], 0.05).unwrap()[0];
        assert!((pred.mean - y[3]).abs() < 1e-5);
        let far = m.predict(&[vec![1e4, -1e4]], 0.05).unwrap()[0];
        assert_relative_eq!(far.mean, m.target_mean, epsilon = 1e-12);
        assert_relative_eq!(far.variance, 1.25, epsilon = 1e-12);
        assert_relative_eq!(far.upper - far.mean, far.mean - far.lower, epsilon = 1e-12);
        assert_relative_eq!(z_value(0.05).unwrap(), 1.959_964, epsilon = 1e-6);
        assert!(matches!(m.predict(&[vec![1.0]], 0.05), Err(GprError::DimensionMismatch { expected: 2, got: 1 })));
    }

    #[test]
    fn posterior_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (x, y) = random_problem(&mut rng, 20, 3);
        let p = KernelParams::new(1.1, 1.3, 0.7, 0.9, 1.2, 0.25).unwrap();
        let m = GprModel::condition(&x, &y, p, KernelKind::Sum).unwrap();
        let (q, _) = random_problem(&mut rng, 5, 3);
        let mut a = kernels::gram(&x, &p, KernelKind::Sum).unwrap().values;
        for i in 0..20 {
            a[(i, i)] += p.sigma_n().powi(2);
        }
        let inv = a.try_inverse().unwrap();
        let mu = y.iter().sum::<f64>() / 20.0;
        let yc = DVector::from_iterator(20, y.iter().map(|v| v - mu));
        let ks = cross_covariance(&q, &x, &p, KernelKind::Sum).unwrap();
        let pred = m.predict(&q, 0.05).unwrap();
        for i in 0..5 {
            let row = ks.row(i).transpose();
            let mean = mu + (row.transpose() * &inv * &yc)[0];
            let var = 1.21 + 0.49 - (row.transpose() * &inv * &row)[0];
            assert!((pred[i].mean - mean).abs() < 1e-8);
            assert!((pred[i].variance - var).abs() < 1e-8);
        }
    }

    #[test]
    fn more_data_never_increases_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = KernelParams::new(1.0, 1.0, 0.6, 1.4, 0.8, 0.2).unwrap();
        for _ in 0..20 {
            let (x, y) = random_problem(&mut rng, 12, 2);
            let (q, _) = random_problem(&mut rng, 4, 2);
            let small = GprModel::condition(&x[..11], &y[..11], p, KernelKind::Sum).unwrap();
            let big = GprModel::condition(&x, &y, p, KernelKind::Sum).unwrap();
            let a = small.predict(&q, 0.05).unwrap();
            let b = big.predict(&q, 0.05).unwrap();
            for (a, b) in a.iter().zip(&b) {
                assert!(b.variance <= a.variance + 1e-12);
                assert!(a.variance <= 1.36 + 1e-12);
            }
        }
    }

    #[test]
    fn intervals_cover_latent_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = KernelParams::new(1.0, 1.0, 0.5, 1.0, 1.0, 0.3).unwrap();
        let trials = 2000;
        let mut hits = 0;
        for _ in 0..trials {
            let pts: Vec<Vec<f64>> = (0..9).map(|_| vec![rng.random_range(-3.0..3.0)]).collect();
            let f = sample_prior(&mut rng, &pts, &p, KernelKind::Sum, false);
            let y: Vec<f64> =
                f[..8].iter().map(|v| v + p.sigma_n() * rng.sample::<f64, _>(StandardNormal)).collect();
            // zero-mean prior: condition without re-centering by adding a known offset back
            let m = GprModel::condition(&pts[..8], &y, p, KernelKind::Sum).unwrap();
            let centred = GprModel { target_mean: 0.0, weights: m.factor.clone().transpose().solve_upper_triangular(
                &m.factor.solve_lower_triangular(&DVector::from_column_slice(&y)).unwrap()).unwrap(), ..m };
            let pred = centred.predict(&pts[8..], 0.05).unwrap()[0];
            if pred.lower <= f[8] && f[8] <= pred.upper {
                hits += 1;
            }
        }
        let cov = hits as f64 / trials as f64;
        assert!((0.92..=0.98).contains(&cov), "{cov}");
    }
}
