//! Conformal prediction intervals around a point forecast.
//!
//! Candidate values are drawn uniformly from a band around the training-target
//! mean; a candidate survives when enough calibration scores are at least as
//! large as its own score. The interval spans the surviving candidates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConformalError {
    #[error("{truth} true values but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("no scores supplied")]
    NoScores,
    #[error("no candidate passed the acceptance threshold")]
    EmptyPiSet,
    #[error("training-target std must be positive, got {0}")]
    NonPositiveStd(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

pub type Result<T> = std::result::Result<T, ConformalError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalConfig {
    pub nu: f64,
    pub num_candidates: usize,
    pub bootstrap_reps: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Score a held-out calibration tail instead of the training fit.
    pub split: bool,
    pub calibration_days: usize,
}

impl Default for ConformalConfig {
    fn default() -> Self {
        Self {
            nu: 3.0,
            num_candidates: 500,
            bootstrap_reps: 30,
            alpha: 0.05,
            seed: 0,
            split: false,
            calibration_days: 60,
        }
    }
}

impl ConformalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(ConformalError::InvalidConfig("nu must be positive"));
        }
        if self.num_candidates < 2 {
            return Err(ConformalError::InvalidConfig("need at least two candidates"));
        }
        if self.bootstrap_reps < 1 {
            return Err(ConformalError::InvalidConfig("need at least one bootstrap repetition"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ConformalError::InvalidConfig("alpha must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Absolute calibration residuals, kept sorted for counting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonconformityScores {
    pub alphas: Vec<f64>,
    sorted: Vec<f64>,
}

impl NonconformityScores {
    pub fn from_alphas(alphas: Vec<f64>) -> Self {
        let mut sorted = alphas.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        Self { alphas, sorted }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// `#{alpha_i >= candidate}`.
    pub fn count_at_least(&self, candidate: f64) -> usize {
        self.sorted.len() - self.sorted.partition_point(|v| *v < candidate)
    }

    /// Elementwise map, e.g. to enlarge every score.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_alphas(self.alphas.iter().map(|a| f(*a)).collect())
    }
}

/// `|P_i - P^_i|` per calibration point.
pub fn scores(truth: &[f64], predicted: &[f64]) -> Result<NonconformityScores> {
    if truth.len() != predicted.len() {
        return Err(ConformalError::LengthMismatch { truth: truth.len(), predicted: predicted.len() });
    }
    if truth.is_empty() {
        return Err(ConformalError::NoScores);
    }
    Ok(NonconformityScores::from_alphas(truth.iter().zip(predicted).map(|(t, p)| (t - p).abs()).collect()))
}

/// `#{alpha_i >= candidate} / (n + 1)`.
pub fn proportionality(scores: &NonconformityScores, candidate: f64) -> f64 {
    scores.count_at_least(candidate) as f64 / (scores.len() + 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub mean: f64,
    pub std: f64,
}

impl TargetStats {
    /// Mean and sample standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// One draw of `J` candidates and the resulting interval.
pub fn interval_once(
    point: f64,
    scores: &NonconformityScores,
    stats: &TargetStats,
    nu: f64,
    config: &ConformalConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Interval> {
    if scores.is_empty() {
        return Err(ConformalError::NoScores);
    }
    if !(stats.std > 0.0) {
        return Err(ConformalError::NonPositiveStd(stats.std));
    }
    let lo = stats.mean - nu * stats.std;
    let hi = stats.mean + nu * stats.std;
    let mut lower = f64::INFINITY;
    let mut upper = f64::NEG_INFINITY;
    for _ in 0..config.num_candidates {
        let u: f64 = rng.random();
        let candidate = lo + (hi - lo) * u;
        if proportionality(scores, (point - candidate).abs()) >= config.alpha {
            lower = lower.min(candidate);
            upper = upper.max(candidate);
        }
    }
    if lower > upper {
        return Err(ConformalError::EmptyPiSet);
    }
    Ok(Interval { lower, upper })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub lower: f64,
    pub upper: f64,
    pub failed_reps: usize,
    /// The candidate band had to be doubled.
    pub widened: bool,
}

fn bootstrap_at(
    point: f64,
    scores: &NonconformityScores,
    stats: &TargetStats,
    nu: f64,
    config: &ConformalConfig,
    rng: &mut ChaCha8Rng,
) -> Result<BootstrapInterval> {
    let mut lo_sum = 0.0;
    let mut hi_sum = 0.0;
    let mut ok = 0usize;
    for _ in 0..config.bootstrap_reps {
        match interval_once(point, scores, stats, nu, config, rng) {
            Ok(iv) => {
                lo_sum += iv.lower;
                hi_sum += iv.upper;
                ok += 1;
            }
            Err(ConformalError::EmptyPiSet) => {}
            Err(e) => return Err(e),
        }
    }
    let failed = config.bootstrap_reps - ok;
    if ok == 0 || 2 * failed > config.bootstrap_reps {
        return Err(ConformalError::EmptyPiSet);
    }
    Ok(BootstrapInterval { lower: lo_sum / ok as f64, upper: hi_sum / ok as f64, failed_reps: failed, widened: false })
}

/// Averages the endpoints of `s` independent redraws. When most redraws come
/// back empty the band is doubled once before giving up.
pub fn interval_bootstrap(
    point: f64,
    scores: &NonconformityScores,
    stats: &TargetStats,
    config: &ConformalConfig,
    rng: &mut ChaCha8Rng,
) -> Result<BootstrapInterval> {
    config.validate()?;
    match bootstrap_at(point, scores, stats, config.nu, config, rng) {
        Err(ConformalError::EmptyPiSet) => {
            let mut iv = bootstrap_at(point, scores, stats, 2.0 * config.nu, config, rng)?;
            iv.widened = true;
            Ok(iv)
        }
        other => other,
    }
}

/// Independent, reproducible stream for one (day, hour) cell.
pub fn stream_rng(seed: u64, day: i64, hour: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((day as u64) << 8) | hour as u64);
    rng
}
