//! Gram-matrix diagnostics on one training window: how many entries of the
//! SE, RQ and SE+RQ covariances are negligible.
//!
//! Each kernel gets its own maximum-likelihood fit on the window. The sum
//! kernel's two components are exported as well (`gram_sum_se`,
//! `gram_sum_rq`); they add up to `gram_sum` exactly.

use std::fmt::Write as _;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtest::{cell_seed, prepare_day, BacktestError};
use crate::config::BacktestConfig;
use crate::dataset::{self, DayPanels};
use crate::gpr::{GprConfig, GprModel};
use crate::kernels::{self, KernelKind, KernelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCount {
    pub kernel: String,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnosis {
    pub date: NaiveDate,
    pub hour: usize,
    pub n: usize,
    pub threshold: f64,
    /// Fitted parameters of `se`, `rq`, `sum`, in that order.
    pub params: Vec<(String, KernelParams)>,
    pub counts: Vec<KernelCount>,
    /// `se`, `rq`, `sum`, `sum_se`, `sum_rq`.
    pub grams: Vec<(String, DMatrix<f64>)>,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    date: NaiveDate,
    hour: usize,
    n: usize,
    threshold: f64,
    params: BTreeMap<&'a str, &'a KernelParams>,
    counts: &'a [KernelCount],
}

fn failed(e: impl std::fmt::Display) -> BacktestError {
    BacktestError::Model(e.to_string())
}

/// Diagnoses the window that precedes `diagnose.target` (or the first
/// backtest day).
pub fn diagnose_on_panels(panels: &DayPanels, config: &BacktestConfig) -> Result<Diagnosis, BacktestError> {
    let date = config.diagnose.target.unwrap_or(config.start);
    let day = panels.day_of(date).ok_or(BacktestError::OutOfRange(date))?;
    let lead = config.window_days + dataset::MAX_LAG;
    if day < lead {
        return Err(BacktestError::InsufficientHistory {
            target: date,
            needed: date - chrono::Duration::days(lead as i64),
            available: panels.start_date(),
        });
    }
    let hour = config.diagnose.hour;
    let ctx = prepare_day(panels, day, 0, config)?;
    let ds = dataset::build_hour_dataset(&ctx.panels, hour, ctx.window)?;
    let seed = cell_seed(config.seed, date, hour);
    let kinds = [("se", KernelKind::SquaredExponential), ("rq", KernelKind::RationalQuadratic), ("sum", KernelKind::Sum)];
    let fits: Vec<KernelParams> = kinds
        .par_iter()
        .map(|&(_, kind)| {
            let gpr = GprConfig { kind, ..config.gpr };
            GprModel::fit(&ds.inputs, &ds.targets, &gpr, seed).map(|m| m.params).map_err(failed)
        })
        .collect::<Result<_, _>>()?;
    let mut grams = Vec::new();
    let mut counts = Vec::new();
    for (&(name, kind), p) in kinds.iter().zip(&fits) {
        let g = kernels::gram(&ds.inputs, p, kind).map_err(failed)?;
        let ins = kernels::insignificance_fraction(&g, config.diagnose.threshold).map_err(failed)?;
        counts.push(KernelCount { kernel: name.into(), count: ins.count, fraction: ins.fraction });
        grams.push((name.to_string(), g.values));
    }
    let sum = &fits[2];
    for (name, kind) in [("sum_se", KernelKind::SquaredExponential), ("sum_rq", KernelKind::RationalQuadratic)] {
        grams.push((name.to_string(), kernels::gram(&ds.inputs, sum, kind).map_err(failed)?.values));
    }
    let params = kinds.iter().map(|k| k.0.to_string()).zip(fits).collect();
    Ok(Diagnosis { date, hour, n: ds.len(), threshold: config.diagnose.threshold, params, counts, grams })
}

pub fn diagnose_kernels(config: &BacktestConfig) -> Result<Diagnosis, BacktestError> {
    let panels = crate::backtest::load_panels(config)?;
    diagnose_on_panels(&panels, config)
}

fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut s = String::with_capacity(m.len() * 20);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "{}", m[(i, j)]);
        }
        s.push('\n');
    }
    s
}

/// Writes `gram_{se,rq,sum,sum_se,sum_rq}.csv` (n rows of n values) and
/// `kernel_counts.json`.
pub fn write_diagnosis(d: &Diagnosis, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, m) in &d.grams {
        fs::write(dir.join(format!("gram_{name}.csv")), matrix_csv(m))?;
    }
    let summary = Summary { date: d.date, hour: d.hour, n: d.n, threshold: d.threshold, params: d.params.iter().map(|(k, p)| (k.as_str(), p)).collect(), counts: &d.counts };
    fs::write(dir.join("kernel_counts.json"), serde_json::to_string_pretty(&summary).map_err(std::io::Error::other)? + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::HourlyPanel;
    use crate::synthetic::{generate, SyntheticConfig};

    #[test]
    fn csv_shapes_and_additivity() {
        let recs = generate(&SyntheticConfig::new(NaiveDate::from_ymd_opt(2022, 1, 1).unwrap(), 60, 4));
        let panels = HourlyPanel::from_records(&recs).unwrap().to_day_panels();
        let mut cfg = BacktestConfig::new("unused", panels.date_of(50), panels.date_of(50));
        cfg.window_days = 20;
        cfg.gpr.restarts = 1;
        cfg.gpr.max_iter = 30;
        let d = diagnose_on_panels(&panels, &cfg).unwrap();
        assert_eq!(d.n, 20);
        assert_eq!(d.counts.len(), 3);
        let dir = tempfile::tempdir().unwrap();
        write_diagnosis(&d, dir.path()).unwrap();
        let read = |name: &str| -> Vec<Vec<f64>> {
            fs::read_to_string(dir.path().join(format!("gram_{name}.csv")))
                .unwrap()
                .lines()
                .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
                .collect()
        };
        let (sum, se, rq) = (read("sum"), read("sum_se"), read("sum_rq"));
        assert_eq!(sum.iter().map(Vec::len).sum::<usize>(), 400);
        for name in ["se", "rq"] {
            assert_eq!(read(name).iter().map(Vec::len).sum::<usize>(), 400);
        }
        for i in 0..20 {
            for j in 0..20 {
                assert_eq!(sum[i][j], se[i][j] + rq[i][j]);
            }
        }
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("kernel_counts.json")).unwrap()).unwrap();
        assert_eq!(json["counts"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn short_history_is_reported() {
        let recs = generate(&SyntheticConfig::new(NaiveDate::from_ymd_opt(2022, 1, 1).unwrap(), 30, 4));
        let panels = HourlyPanel::from_records(&recs).unwrap().to_day_panels();
        let mut cfg = BacktestConfig::new("unused", panels.date_of(20), panels.date_of(20));
        cfg.window_days = 20;
        assert!(matches!(diagnose_on_panels(&panels, &cfg), Err(BacktestError::InsufficientHistory { .. })));
    }
}
