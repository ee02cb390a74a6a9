//! Point and interval error metrics and the significance tests used to
//! compare forecasters.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no values")]
    Empty,
    #[error("every MAPE term had a near-zero true value")]
    AllTermsSkipped,
    #[error("interval lower bound {lower} exceeds upper bound {upper}")]
    InvalidInterval { lower: f64, upper: f64 },
    #[error("need at least {min} observations, got {n}")]
    TooShort { n: usize, min: usize },
    #[error("loss differential has zero variance")]
    ZeroVariance,
    #[error("need at least two models and two blocks")]
    TooFewBlocks,
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// True values with magnitude below this are left out of percentage errors.
pub const NEAR_ZERO: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyMetrics {
    pub rmse: f64,
    pub mae: f64,
    /// `sqrt(mean |e / P|)`, the square-rooted form.
    pub mape_paper: f64,
    /// `mean |e / P|`.
    pub mape_std: f64,
    /// `sqrt(mean 2|e| / (|P| + |P^|))`.
    pub smape_paper: f64,
    pub smape_std: f64,
    pub mape_skipped: usize,
    pub smape_skipped: usize,
}

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Error metrics for one day (or any block of `m` hours).
pub fn daily_metrics(truth: &[f64], predicted: &[f64]) -> Result<DailyMetrics> {
    check_len(truth, predicted)?;
    let m = truth.len() as f64;
    let mut sq = 0.0;
    let mut abs = 0.0;
    let (mut mape, mut mape_n, mut smape, mut smape_n) = (0.0, 0usize, 0.0, 0usize);
    for (&p, &q) in truth.iter().zip(predicted) {
        let e = p - q;
        sq += e * e;
        abs += e.abs();
        if p.abs() >= NEAR_ZERO {
            mape += (e / p).abs();
            mape_n += 1;
        }
        let denom = p.abs() + q.abs();
        if denom >= NEAR_ZERO {
            smape += 2.0 * e.abs() / denom;
            smape_n += 1;
        }
    }
    if mape_n == 0 {
        return Err(MetricsError::AllTermsSkipped);
    }
    let mape_std = mape / mape_n as f64;
    let smape_std = if smape_n == 0 { 0.0 } else { smape / smape_n as f64 };
    Ok(DailyMetrics {
        rmse: (sq / m).sqrt(),
        mae: abs / m,
        mape_paper: mape_std.sqrt(),
        mape_std,
        smape_paper: smape_std.sqrt(),
        smape_std,
        mape_skipped: truth.len() - mape_n,
        smape_skipped: truth.len() - smape_n,
    })
}

/// Mean over days.
pub fn error_score(daily: &[f64]) -> Result<f64> {
    if daily.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(daily.iter().sum::<f64>() / daily.len() as f64)
}

fn check_intervals(lower: &[f64], upper: &[f64]) -> Result<()> {
    check_len(lower, upper)?;
    for (&l, &u) in lower.iter().zip(upper) {
        if !(l <= u) {
            return Err(MetricsError::InvalidInterval { lower: l, upper: u });
        }
    }
    Ok(())
}

/// Share of true values inside their interval.
pub fn picp(truth: &[f64], lower: &[f64], upper: &[f64]) -> Result<f64> {
    check_len(truth, lower)?;
    check_intervals(lower, upper)?;
    let inside = truth.iter().zip(lower.iter().zip(upper)).filter(|(p, (l, u))| *l <= *p && *p <= *u).count();
    Ok(inside as f64 / truth.len() as f64)
}

/// Mean interval width.
pub fn mpiw(lower: &[f64], upper: &[f64]) -> Result<f64> {
    check_intervals(lower, upper)?;
    Ok(lower.iter().zip(upper).map(|(l, u)| u - l).sum::<f64>() / lower.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub statistic: f64,
    pub p_value: f64,
    pub lag: usize,
}

pub const DM_MIN_LEN: usize = 10;

/// Diebold-Mariano test on `d_t = loss_a - loss_b`, with a Bartlett long-run
/// variance truncated at `floor(n^(1/3))` and a two-sided normal p-value.
/// A positive statistic means model `a` has the larger loss.
pub fn dm_test(loss_a: &[f64], loss_b: &[f64]) -> Result<DmResult> {
    check_len(loss_a, loss_b)?;
    let n = loss_a.len();
    if n < DM_MIN_LEN {
        return Err(MetricsError::TooShort { n, min: DM_MIN_LEN });
    }
    let d: Vec<f64> = loss_a.iter().zip(loss_b).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let lag = (nf.cbrt() + 1e-9).floor() as usize;
    let autocov = |k: usize| (k..n).map(|t| (d[t] - mean) * (d[t - k] - mean)).sum::<f64>() / nf;
    let mut lrv = autocov(0);
    for k in 1..=lag {
        lrv += 2.0 * (1.0 - k as f64 / (lag as f64 + 1.0)) * autocov(k);
    }
    let scale = d.iter().map(|v| v * v).sum::<f64>() / nf;
    if !(lrv > 1e-12 * scale) || lrv <= 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    let statistic = mean / (lrv / nf).sqrt();
    let p_value = 2.0 * Normal::standard().cdf(-statistic.abs());
    Ok(DmResult { statistic, p_value, lag })
}

/// Ranks within one block, lowest loss first, ties sharing the average rank.
pub fn rank_block(losses: &[f64]) -> Vec<f64> {
    let k = losses.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]));
    let mut ranks = vec![0.0; k];
    let mut i = 0;
    while i < k {
        let mut j = i;
        while j + 1 < k && losses[order[j + 1]] == losses[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub mean_ranks: Vec<f64>,
    pub statistic: f64,
    pub p_value: f64,
    pub blocks: usize,
    /// Pairwise Nemenyi p-values, symmetric with ones on the diagonal.
    pub nemenyi: Vec<Vec<f64>>,
}

/// Friedman rank test over `blocks[b][model]` losses plus Nemenyi pairwise
/// p-values. When every block is a complete tie the statistic is 0.
pub fn friedman_nemenyi(blocks: &[Vec<f64>]) -> Result<FriedmanResult> {
    let n = blocks.len();
    let k = blocks.first().map_or(0, |b| b.len());
    if n < 2 || k < 2 {
        return Err(MetricsError::TooFewBlocks);
    }
    if let Some(b) = blocks.iter().find(|b| b.len() != k) {
        return Err(MetricsError::LengthMismatch(k, b.len()));
    }
    let mut mean_ranks = vec![0.0; k];
    for b in blocks {
        for (m, r) in mean_ranks.iter_mut().zip(rank_block(b)) {
            *m += r;
        }
    }
    mean_ranks.iter_mut().for_each(|m| *m /= n as f64);
    let kf = k as f64;
    let nf = n as f64;
    let spread: f64 = mean_ranks.iter().map(|r| r * r).sum::<f64>() - kf * (kf + 1.0).powi(2) / 4.0;
    let statistic = (12.0 * nf / (kf * (kf + 1.0)) * spread).max(0.0);
    let chi = ChiSquared::new(kf - 1.0).expect("k >= 2");
    let p_value = (1.0 - chi.cdf(statistic)).clamp(0.0, 1.0);
    let se = (kf * (kf + 1.0) / (6.0 * nf)).sqrt();
    let mut nemenyi = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in 0..i {
            let z = (mean_ranks[i] - mean_ranks[j]).abs() / se;
            let p = studentized_range_sf(z * std::f64::consts::SQRT_2, k);
            nemenyi[i][j] = p;
            nemenyi[j][i] = p;
        }
    }
    Ok(FriedmanResult { mean_ranks, statistic, p_value, blocks: n, nemenyi })
}

/// `P(Q > q)` for the range of `k` independent standard normals (infinite
/// degrees of freedom), via
/// `k * int phi(z) (Phi(z)^(k-1) - (Phi(z) - Phi(z - q))^(k-1)) dz`.
pub fn studentized_range_sf(q: f64, k: usize) -> f64 {
    if q <= 0.0 {
        return 1.0;
    }
    let normal = Normal::standard();
    let km1 = (k - 1) as f64;
    let integrand = |z: f64| {
        let hi = normal.cdf(z);
        if hi <= 0.0 {
            return 0.0;
        }
        let lo = normal.cdf(z - q);
        let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        // Phi^(k-1) * (1 - (1 - lo/hi)^(k-1)), cancellation-free
        let tail = -(km1 * (-lo / hi).ln_1p()).exp_m1();
        phi * hi.powf(km1) * tail
    };
    let (a, b) = (-12.0, 12.0);
    let steps = 1200;
    let h = (b - a) / steps as f64;
    let mut s = integrand(a) + integrand(b);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * integrand(a + i as f64 * h);
    }
    (k as f64 * s * h / 3.0).clamp(0.0, 1.0)
}
