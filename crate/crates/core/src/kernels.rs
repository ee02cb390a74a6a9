//! Stationary covariance functions, their Gram matrices and derivatives.
//!
//! All kernels here are isotropic: they depend on two inputs only through the
//! Euclidean distance `r = ||t_i - t_j||`. Positive hyperparameters are held
//! as logarithms so any real vector is a valid parameterization.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("kernel parameter {name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("local periodic parameters are missing")]
    PeriodicParamsMissing,
    #[error("matrix is not factorizable even with jitter {max_jitter:e}")]
    NotFactorizable { max_jitter: f64 },
    #[error("inputs must be non-empty with uniform dimension")]
    BadInputs,
    #[error("matrix is constant; cannot rescale to [0, 1]")]
    ConstantMatrix,
}

pub type Result<T> = std::result::Result<T, KernelError>;

/// First jitter tried after a plain factorization fails.
pub const JITTER_START: f64 = 1e-10;
/// Number of tenfold jitter escalations (1e-10 up to 1e-4).
pub const JITTER_ESCALATIONS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicParams {
    pub log_period: f64,
    pub log_ell: f64,
    /// Length scale of the Gaussian envelope.
    pub log_sigma: f64,
    pub log_amplitude: f64,
}

impl PeriodicParams {
    pub fn new(period: f64, ell: f64, sigma: f64) -> Result<Self> {
        Ok(Self {
            log_period: positive_log("p", period)?,
            log_ell: positive_log("ell_lp", ell)?,
            log_sigma: positive_log("sigma_lp", sigma)?,
            log_amplitude: 0.0,
        })
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Result<Self> {
        self.log_amplitude = positive_log("amplitude_lp", amplitude)?;
        Ok(self)
    }

    pub fn period(&self) -> f64 {
        self.log_period.exp()
    }
    pub fn ell(&self) -> f64 {
        self.log_ell.exp()
    }
    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }
    pub fn amplitude(&self) -> f64 {
        self.log_amplitude.exp()
    }
}

fn positive_log(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value.ln())
    } else {
        Err(KernelError::NonPositive { name, value })
    }
}

/// Hyperparameters of the composite kernel plus observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub log_sigma_se: f64,
    pub log_ell_se: f64,
    pub log_sigma_rq: f64,
    pub log_ell_rq: f64,
    pub log_alpha_rq: f64,
    /// `-inf` encodes a noiseless model.
    pub log_sigma_n: f64,
    pub periodic: Option<PeriodicParams>,
}

impl KernelParams {
    pub fn new(sigma_se: f64, ell_se: f64, sigma_rq: f64, ell_rq: f64, alpha_rq: f64, sigma_n: f64) -> Result<Self> {
        if !(sigma_n >= 0.0 && sigma_n.is_finite()) {
            return Err(KernelError::NonPositive { name: "sigma_n", value: sigma_n });
        }
        Ok(Self {
            log_sigma_se: positive_log("sigma_se", sigma_se)?,
            log_ell_se: positive_log("ell_se", ell_se)?,
            log_sigma_rq: positive_log("sigma_rq", sigma_rq)?,
            log_ell_rq: positive_log("ell_rq", ell_rq)?,
            log_alpha_rq: positive_log("alpha_rq", alpha_rq)?,
            log_sigma_n: sigma_n.ln(),
            periodic: None,
        })
    }

    pub fn with_periodic(mut self, periodic: PeriodicParams) -> Self {
        self.periodic = Some(periodic);
        self
    }

    pub fn sigma_se(&self) -> f64 {
        self.log_sigma_se.exp()
    }
    pub fn ell_se(&self) -> f64 {
        self.log_ell_se.exp()
    }
    pub fn sigma_rq(&self) -> f64 {
        self.log_sigma_rq.exp()
    }
    pub fn ell_rq(&self) -> f64 {
        self.log_ell_rq.exp()
    }
    pub fn alpha_rq(&self) -> f64 {
        self.log_alpha_rq.exp()
    }
    pub fn sigma_n(&self) -> f64 {
        self.log_sigma_n.exp()
    }

    pub fn get(&self, id: ParamId) -> f64 {
        let p = self.periodic.as_ref();
        match id {
            ParamId::SigmaSe => self.log_sigma_se,
            ParamId::EllSe => self.log_ell_se,
            ParamId::SigmaRq => self.log_sigma_rq,
            ParamId::EllRq => self.log_ell_rq,
            ParamId::AlphaRq => self.log_alpha_rq,
            ParamId::SigmaN => self.log_sigma_n,
            ParamId::Period => p.map_or(f64::NAN, |p| p.log_period),
            ParamId::EllLp => p.map_or(f64::NAN, |p| p.log_ell),
            ParamId::SigmaLp => p.map_or(f64::NAN, |p| p.log_sigma),
            ParamId::AmplitudeLp => p.map_or(f64::NAN, |p| p.log_amplitude),
        }
    }

    pub fn set(&mut self, id: ParamId, log_value: f64) {
        let slot = match id {
            ParamId::SigmaSe => &mut self.log_sigma_se,
            ParamId::EllSe => &mut self.log_ell_se,
            ParamId::SigmaRq => &mut self.log_sigma_rq,
            ParamId::EllRq => &mut self.log_ell_rq,
            ParamId::AlphaRq => &mut self.log_alpha_rq,
            ParamId::SigmaN => &mut self.log_sigma_n,
            ParamId::Period | ParamId::EllLp | ParamId::SigmaLp | ParamId::AmplitudeLp => {
                let p = self.periodic.get_or_insert(PeriodicParams {
                    log_period: 0.0,
                    log_ell: 0.0,
                    log_sigma: 0.0,
                    log_amplitude: 0.0,
                });
                match id {
                    ParamId::Period => &mut p.log_period,
                    ParamId::EllLp => &mut p.log_ell,
                    ParamId::SigmaLp => &mut p.log_sigma,
                    _ => &mut p.log_amplitude,
                }
            }
        };
        *slot = log_value;
    }
}

/// Identifies one log-hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamId {
    SigmaSe,
    EllSe,
    SigmaRq,
    EllRq,
    AlphaRq,
    SigmaN,
    Period,
    EllLp,
    SigmaLp,
    AmplitudeLp,
}

/// Which covariance function is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    SquaredExponential,
    RationalQuadratic,
    /// `K_se + K_rq`.
    Sum,
    /// `K_se + K_rq + K_lp`.
    SumWithLocalPeriodic,
}

impl KernelKind {
    /// Log-parameters the kernel (and the noise) actually depends on.
    pub fn active_params(self) -> Vec<ParamId> {
        use ParamId::*;
        match self {
            KernelKind::SquaredExponential => vec![SigmaSe, EllSe, SigmaN],
            KernelKind::RationalQuadratic => vec![SigmaRq, EllRq, AlphaRq, SigmaN],
            KernelKind::Sum => vec![SigmaSe, EllSe, SigmaRq, EllRq, AlphaRq, SigmaN],
            KernelKind::SumWithLocalPeriodic => {
                vec![SigmaSe, EllSe, SigmaRq, EllRq, AlphaRq, SigmaN, Period, EllLp, SigmaLp, AmplitudeLp]
            }
        }
    }

    fn has_se(self) -> bool {
        !matches!(self, KernelKind::RationalQuadratic)
    }

    fn has_rq(self) -> bool {
        !matches!(self, KernelKind::SquaredExponential)
    }
}

/// `sigma_se^2 exp(-r^2 / (2 ell_se^2))`.
pub fn k_se(r: f64, params: &KernelParams) -> f64 {
    se_from_sq(r * r, params)
}

fn se_from_sq(r2: f64, p: &KernelParams) -> f64 {
    let ell = p.ell_se();
    p.sigma_se().powi(2) * (-r2 / (2.0 * ell * ell)).exp()
}

/// `sigma_rq^2 (1 + r^2 / (2 alpha ell_rq^2))^(-alpha)`.
pub fn k_rq(r: f64, params: &KernelParams) -> f64 {
    rq_from_sq(r * r, params)
}

fn rq_from_sq(r2: f64, p: &KernelParams) -> f64 {
    let ell = p.ell_rq();
    let alpha = p.alpha_rq();
    let base = r2 / (2.0 * alpha * ell * ell);
    p.sigma_rq().powi(2) * (-alpha * base.ln_1p()).exp()
}

/// Local periodic kernel:
/// `a^2 exp(-2 sin^2(pi r / p) / ell_lp^2) exp(-r^2 / (2 sigma_lp^2))`.
pub fn k_local_periodic(r: f64, params: &KernelParams) -> Result<f64> {
    let p = params.periodic.as_ref().ok_or(KernelError::PeriodicParamsMissing)?;
    Ok(lp_value(r, p))
}

fn lp_value(r: f64, p: &PeriodicParams) -> f64 {
    let s = (PI * r / p.period()).sin();
    let ell = p.ell();
    let sig = p.sigma();
    p.amplitude().powi(2) * (-2.0 * s * s / (ell * ell) - r * r / (2.0 * sig * sig)).exp()
}

/// `1 / ell_eff^2 = 1 / sigma_lp^2 + 4 pi^2 / (p^2 ell_lp^2)`: the Gaussian
/// that matches the local periodic kernel to second order around `r = 0`.
pub fn effective_length_scale(p: &PeriodicParams) -> f64 {
    let inv = 1.0 / p.sigma().powi(2) + 4.0 * PI * PI / (p.period().powi(2) * p.ell().powi(2));
    inv.sqrt().recip()
}

/// Covariance at distance `r` for the chosen kernel.
pub fn kernel_value(r: f64, params: &KernelParams, kind: KernelKind) -> Result<f64> {
    kernel_from_sq(r * r, params, kind)
}

/// Covariance from a squared distance.
pub fn kernel_from_sq(r2: f64, params: &KernelParams, kind: KernelKind) -> Result<f64> {
    let mut v = 0.0;
    if kind.has_se() {
        v += se_from_sq(r2, params);
    }
    if kind.has_rq() {
        v += rq_from_sq(r2, params);
    }
    if kind == KernelKind::SumWithLocalPeriodic {
        let p = params.periodic.as_ref().ok_or(KernelError::PeriodicParamsMissing)?;
        v += lp_value(r2.sqrt(), p);
    }
    Ok(v)
}

/// Prior variance `k(0)` of the latent function.
pub fn prior_variance(params: &KernelParams, kind: KernelKind) -> Result<f64> {
    kernel_from_sq(0.0, params, kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOrder {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeKernel {
    SquaredExponential,
    RationalQuadratic,
    Sum,
}

/// Derivative of the kernel with respect to the distance `r`.
pub fn kernel_derivative(r: f64, params: &KernelParams, order: DerivativeOrder, which: DerivativeKernel) -> f64 {
    let se = || {
        let s2 = params.sigma_se().powi(2);
        let l2 = params.ell_se().powi(2);
        let e = (-r * r / (2.0 * l2)).exp();
        match order {
            DerivativeOrder::First => s2 * (-r / l2) * e,
            DerivativeOrder::Second => s2 * (r * r / (l2 * l2) - 1.0 / l2) * e,
        }
    };
    let rq = || {
        let s2 = params.sigma_rq().powi(2);
        let l2 = params.ell_rq().powi(2);
        let a = params.alpha_rq();
        let base = 1.0 + r * r / (2.0 * a * l2);
        match order {
            DerivativeOrder::First => -r * s2 / l2 * base.powf(-a - 1.0),
            DerivativeOrder::Second => {
                s2 * r * r * (a + 1.0) / (a * l2 * l2) * base.powf(-a - 2.0) - s2 / l2 * base.powf(-a - 1.0)
            }
        }
    };
    match which {
        DerivativeKernel::SquaredExponential => se(),
        DerivativeKernel::RationalQuadratic => rq(),
        DerivativeKernel::Sum => se() + rq(),
    }
}

/// Pairwise squared Euclidean distances, computed once per input set.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredDistances {
    n: usize,
    values: Vec<f64>,
}

impl SquaredDistances {
    pub fn new<T: AsRef<[f64]>>(inputs: &[T]) -> Result<Self> {
        let dim = check_inputs(inputs)?;
        let n = inputs.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            let a = inputs[i].as_ref();
            for j in 0..i {
                let d = sq_dist(a, inputs[j].as_ref(), dim);
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Ok(Self { n, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Median of the off-diagonal distances (not squared); 1 when undefined.
    pub fn median_distance(&self) -> f64 {
        let mut d: Vec<f64> = (0..self.n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j).sqrt())
            .filter(|v| *v > 0.0)
            .collect();
        if d.is_empty() {
            return 1.0;
        }
        d.sort_by(|a, b| a.total_cmp(b));
        d[d.len() / 2]
    }
}

fn check_inputs<T: AsRef<[f64]>>(inputs: &[T]) -> Result<usize> {
    let dim = inputs.first().ok_or(KernelError::BadInputs)?.as_ref().len();
    if inputs.iter().any(|x| x.as_ref().len() != dim) {
        return Err(KernelError::BadInputs);
    }
    Ok(dim)
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64], dim: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..dim {
        let d = a[k] - b[k];
        s += d * d;
    }
    s
}

/// A symmetric covariance matrix together with the diagonal jitter needed to
/// factorize it. `values` never includes the jitter.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub values: DMatrix<f64>,
    pub jitter_applied: f64,
}

impl GramMatrix {
    pub fn jittered(&self) -> DMatrix<f64> {
        let mut m = self.values.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += self.jitter_applied;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

/// Cholesky factorization with the escalating jitter ladder: plain first,
/// then `1e-10, 1e-9, ..., 1e-4` added to the diagonal.
pub fn cholesky_with_jitter(matrix: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = Cholesky::new(matrix.clone()) {
        return Ok((c, 0.0));
    }
    let mut jitter = JITTER_START;
    for _ in 0..JITTER_ESCALATIONS {
        let mut m = matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok((c, jitter));
        }
        jitter *= 10.0;
    }
    Err(KernelError::NotFactorizable { max_jitter: jitter / 10.0 })
}

pub(crate) fn gram_from_distances(dist: &SquaredDistances, params: &KernelParams, kind: KernelKind) -> Result<DMatrix<f64>> {
    let n = dist.len();
    let diag = kernel_from_sq(0.0, params, kind)?;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag;
        for j in 0..i {
            let v = kernel_from_sq(dist.get(i, j), params, kind)?;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Gram matrix `K[i, j] = k(||t_i - t_j||)` with the jitter needed to factorize it.
pub fn gram<T: AsRef<[f64]>>(inputs: &[T], params: &KernelParams, kind: KernelKind) -> Result<GramMatrix> {
    let dist = SquaredDistances::new(inputs)?;
    let values = gram_from_distances(&dist, params, kind)?;
    let (_, jitter_applied) = cholesky_with_jitter(&values)?;
    Ok(GramMatrix { values, jitter_applied })
}

/// Cross-covariance between query points and training points (`m x n`).
pub fn cross_covariance<A: AsRef<[f64]>, B: AsRef<[f64]>>(
    queries: &[A],
    train: &[B],
    params: &KernelParams,
    kind: KernelKind,
) -> Result<DMatrix<f64>> {
    let dim = train.first().ok_or(KernelError::BadInputs)?.as_ref().len();
    let mut m = DMatrix::zeros(queries.len(), train.len());
    for (i, q) in queries.iter().enumerate() {
        let q = q.as_ref();
        if q.len() != dim {
            return Err(KernelError::BadInputs);
        }
        for (j, t) in train.iter().enumerate() {
            m[(i, j)] = kernel_from_sq(sq_dist(q, t.as_ref(), dim), params, kind)?;
        }
    }
    Ok(m)
}

/// Derivatives of a single covariance entry (squared distance `r2`) with
/// respect to each requested log-parameter. The noise term is handled by the
/// caller since it lives on the diagonal only.
pub(crate) fn entry_param_gradient(r2: f64, params: &KernelParams, kind: KernelKind, ids: &[ParamId], out: &mut [f64]) {
    let se = if kind.has_se() { se_from_sq(r2, params) } else { 0.0 };
    let (rq, rq_u) = if kind.has_rq() {
        let u = r2 / (2.0 * params.alpha_rq() * params.ell_rq().powi(2));
        (rq_from_sq(r2, params), u)
    } else {
        (0.0, 0.0)
    };
    let lp = match (kind, params.periodic.as_ref()) {
        (KernelKind::SumWithLocalPeriodic, Some(p)) => Some((p, lp_value(r2.sqrt(), p))),
        _ => None,
    };
    for (slot, id) in out.iter_mut().zip(ids) {
        *slot = match id {
            ParamId::SigmaSe => 2.0 * se,
            ParamId::EllSe => se * r2 / params.ell_se().powi(2),
            ParamId::SigmaRq => 2.0 * rq,
            ParamId::EllRq => rq * (r2 / params.ell_rq().powi(2)) / (1.0 + rq_u),
            ParamId::AlphaRq => params.alpha_rq() * rq * (rq_u / (1.0 + rq_u) - rq_u.ln_1p()),
            ParamId::SigmaN => 0.0,
            ParamId::Period | ParamId::EllLp | ParamId::SigmaLp | ParamId::AmplitudeLp => match lp {
                None => 0.0,
                Some((p, k)) => {
                    let r = r2.sqrt();
                    let period = p.period();
                    let ell2 = p.ell().powi(2);
                    match id {
                        ParamId::Period => k * 2.0 * PI * r * (2.0 * PI * r / period).sin() / (period * ell2),
                        ParamId::EllLp => k * 4.0 * (PI * r / period).sin().powi(2) / ell2,
                        ParamId::SigmaLp => k * r2 / p.sigma().powi(2),
                        _ => 2.0 * k,
                    }
                }
            },
        };
    }
}

/// `dK/d(log theta)` for every active parameter of `kind`, including the
/// noise, whose derivative is `2 sigma_n^2 I`.
pub fn gram_param_gradients<T: AsRef<[f64]>>(
    inputs: &[T],
    params: &KernelParams,
    kind: KernelKind,
) -> Result<Vec<(ParamId, DMatrix<f64>)>> {
    if kind == KernelKind::SumWithLocalPeriodic && params.periodic.is_none() {
        return Err(KernelError::PeriodicParamsMissing);
    }
    let dist = SquaredDistances::new(inputs)?;
    let n = dist.len();
    let ids = kind.active_params();
    let mut mats: Vec<DMatrix<f64>> = ids.iter().map(|_| DMatrix::zeros(n, n)).collect();
    let mut buf = vec![0.0; ids.len()];
    for i in 0..n {
        for j in 0..=i {
            entry_param_gradient(dist.get(i, j), params, kind, &ids, &mut buf);
            for (m, v) in mats.iter_mut().zip(&buf) {
                m[(i, j)] = *v;
                m[(j, i)] = *v;
            }
        }
    }
    if let Some(pos) = ids.iter().position(|id| *id == ParamId::SigmaN) {
        let noise = 2.0 * params.sigma_n().powi(2);
        for i in 0..n {
            mats[pos][(i, i)] = noise;
        }
    }
    Ok(ids.into_iter().zip(mats).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Insignificance {
    pub count: usize,
    pub fraction: f64,
}

/// Rescales the matrix to `[0, 1]` by its global minimum and maximum and
/// counts the entries below `threshold`.
pub fn insignificance_fraction(gram: &GramMatrix, threshold: f64) -> Result<Insignificance> {
    let values = gram.values.as_slice();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(KernelError::ConstantMatrix);
    }
    let range = max - min;
    let count = values.iter().filter(|&&v| (v - min) / range < threshold).count();
    Ok(Insignificance {
        count,
        fraction: count as f64 / values.len() as f64,
    })
}
