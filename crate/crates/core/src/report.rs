//! Artifacts of a backtest: forecast and actual tables, aggregate metrics,
//! significance tests and seasonal plots. Everything here can be recomputed
//! from the CSV files alone.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backtest::{Actual, BacktestOutput, Failure, ForecastRecord};
use crate::dataset::HOURS_PER_DAY;
use crate::metrics::{self, MetricsError};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path} line {line}: {reason}")]
    BadRow { path: String, line: u64, reason: String },
}

pub type Result<T> = std::result::Result<T, ReportError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ReportError + '_ {
    move |source| ReportError::Csv { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Winter,
    Spring,
    Summer,
    Autumn,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Winter, Season::Spring, Season::Summer, Season::Autumn];

    pub fn of(date: NaiveDate) -> Self {
        match date.month() {
            12 | 1 | 2 => Season::Winter,
            3..=5 => Season::Spring,
            6..=8 => Season::Summer,
            _ => Season::Autumn,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Season::Winter => "winter",
            Season::Spring => "spring",
            Season::Summer => "summer",
            Season::Autumn => "autumn",
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_predictions(records: &[ForecastRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["date", "hour", "model", "point", "lb", "ub", "runtime_ms"]).map_err(csv_err(path))?;
    for r in records {
        w.write_record([
            r.date.format("%Y-%m-%d").to_string(),
            r.hour.to_string(),
            r.model.clone(),
            r.point.to_string(),
            fmt_opt(r.lb),
            fmt_opt(r.ub),
            fmt_opt(r.runtime_ms),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_actuals(actuals: &[Actual], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["date", "hour", "price"]).map_err(csv_err(path))?;
    for a in actuals {
        w.write_record([a.date.format("%Y-%m-%d").to_string(), a.hour.to_string(), a.price.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_failures(failures: &[Failure], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["date", "hour", "model", "reason"]).map_err(csv_err(path))?;
    for f in failures {
        w.write_record([f.date.format("%Y-%m-%d").to_string(), f.hour.to_string(), f.model.clone(), f.reason.clone()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn field<'a>(rec: &'a csv::StringRecord, idx: &BTreeMap<String, usize>, name: &str, path: &Path, line: u64) -> Result<&'a str> {
    idx.get(name)
        .and_then(|&i| rec.get(i))
        .map(str::trim)
        .ok_or_else(|| ReportError::BadRow { path: path.display().to_string(), line, reason: format!("missing column `{name}`") })
}

fn parse<T: std::str::FromStr>(s: &str, name: &str, path: &Path, line: u64) -> Result<T> {
    s.parse().map_err(|_| ReportError::BadRow {
        path: path.display().to_string(),
        line,
        reason: format!("cannot parse {name} `{s}`"),
    })
}

fn parse_opt(s: &str, name: &str, path: &Path, line: u64) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse(s, name, path, line).map(Some)
    }
}

fn header_index(r: &mut csv::Reader<fs::File>, path: &Path) -> Result<BTreeMap<String, usize>> {
    let h = r.headers().map_err(csv_err(path))?;
    Ok(h.iter().enumerate().map(|(i, n)| (n.trim().to_string(), i)).collect())
}

/// Reads a file in the predictions schema; `runtime_ms`, `lb` and `ub` may
/// be empty or absent.
pub fn read_predictions(path: &Path) -> Result<Vec<ForecastRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let idx = header_index(&mut r, path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let line = i as u64 + 2;
        let opt = |name: &str| -> Result<Option<f64>> {
            match idx.get(name).and_then(|&j| rec.get(j)) {
                Some(s) => parse_opt(s.trim(), name, path, line),
                None => Ok(None),
            }
        };
        let date: NaiveDate = parse(field(&rec, &idx, "date", path, line)?, "date", path, line)?;
        let hour: usize = parse(field(&rec, &idx, "hour", path, line)?, "hour", path, line)?;
        if hour >= HOURS_PER_DAY {
            return Err(ReportError::BadRow { path: path.display().to_string(), line, reason: format!("hour {hour} out of range") });
        }
        out.push(ForecastRecord {
            date,
            hour,
            model: field(&rec, &idx, "model", path, line)?.to_string(),
            point: parse(field(&rec, &idx, "point", path, line)?, "point", path, line)?,
            lb: opt("lb")?,
            ub: opt("ub")?,
            runtime_ms: opt("runtime_ms")?,
            point_transformed: None,
        });
    }
    Ok(out)
}

pub fn read_actuals(path: &Path) -> Result<Vec<Actual>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let idx = header_index(&mut r, path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let line = i as u64 + 2;
        out.push(Actual {
            date: parse(field(&rec, &idx, "date", path, line)?, "date", path, line)?,
            hour: parse(field(&rec, &idx, "hour", path, line)?, "hour", path, line)?,
            price: parse(field(&rec, &idx, "price", path, line)?, "price", path, line)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRow {
    pub date: NaiveDate,
    pub rmse: f64,
    pub mae: f64,
    pub mape_paper: Option<f64>,
    pub mape_std: Option<f64>,
    pub smape_paper: f64,
    pub smape_std: f64,
    pub picp: Option<f64>,
    pub mpiw: Option<f64>,
    /// Daily mean squared error, the loss compared in significance tests.
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub days: usize,
    pub mae: f64,
    pub rmse: f64,
    pub mape_paper: Option<f64>,
    /// `mape_paper * 100`.
    pub mape_paper_pct: Option<f64>,
    pub mape_std: Option<f64>,
    pub smape_paper: f64,
    pub smape_paper_pct: f64,
    pub smape_std: f64,
    pub picp: Option<f64>,
    pub mpiw: Option<f64>,
    pub mape_skipped_terms: usize,
    pub smape_skipped_terms: usize,
    pub mape_skipped_days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub models: BTreeMap<String, ModelMetrics>,
    pub daily: BTreeMap<String, Vec<DayRow>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmEntry {
    pub year: i32,
    pub model_a: String,
    pub model_b: String,
    pub days: usize,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub lag: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanEntry {
    pub models: Vec<String>,
    pub blocks: usize,
    pub mean_ranks: Vec<f64>,
    pub statistic: f64,
    pub p_value: f64,
    /// Pairwise p-values, indexed like `models`.
    pub nemenyi: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub dm: Vec<DmEntry>,
    pub friedman: Option<FriedmanEntry>,
    pub friedman_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metrics: MetricsReport,
    pub tests: TestReport,
}

type Hours = [Option<(f64, Option<(f64, f64)>)>; HOURS_PER_DAY];

/// Forecast days with all 24 hours present, per model.
fn complete_days(records: &[ForecastRecord]) -> BTreeMap<String, BTreeMap<NaiveDate, Hours>> {
    let mut out: BTreeMap<String, BTreeMap<NaiveDate, Hours>> = BTreeMap::new();
    for r in records {
        let interval = match (r.lb, r.ub) {
            (Some(l), Some(u)) => Some((l, u)),
            _ => None,
        };
        out.entry(r.model.clone()).or_default().entry(r.date).or_insert([None; HOURS_PER_DAY])[r.hour] = Some((r.point, interval));
    }
    for days in out.values_mut() {
        days.retain(|_, h| h.iter().all(Option::is_some));
    }
    out
}

fn day_row(date: NaiveDate, truth: &[f64], hours: &Hours) -> Option<DayRow> {
    let pred: Vec<f64> = hours.iter().map(|h| h.unwrap().0).collect();
    let mse = truth.iter().zip(&pred).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / truth.len() as f64;
    let (rmse, mae, mape_paper, mape_std, smape_paper, smape_std) = match metrics::daily_metrics(truth, &pred) {
        Ok(m) => (m.rmse, m.mae, Some(m.mape_paper), Some(m.mape_std), m.smape_paper, m.smape_std),
        Err(MetricsError::AllTermsSkipped) => {
            let mae = truth.iter().zip(&pred).map(|(a, b)| (a - b).abs()).sum::<f64>() / truth.len() as f64;
            let smape: Vec<f64> = truth
                .iter()
                .zip(&pred)
                .filter(|(a, b)| a.abs() + b.abs() >= metrics::NEAR_ZERO)
                .map(|(a, b)| 2.0 * (a - b).abs() / (a.abs() + b.abs()))
                .collect();
            let s = if smape.is_empty() { 0.0 } else { smape.iter().sum::<f64>() / smape.len() as f64 };
            (mse.sqrt(), mae, None, None, s.sqrt(), s)
        }
        Err(_) => return None,
    };
    let intervals: Option<Vec<(f64, f64)>> = hours.iter().map(|h| h.unwrap().1).collect();
    let (picp, mpiw) = match intervals {
        Some(iv) => {
            let lo: Vec<f64> = iv.iter().map(|i| i.0).collect();
            let hi: Vec<f64> = iv.iter().map(|i| i.1).collect();
            (metrics::picp(truth, &lo, &hi).ok(), metrics::mpiw(&lo, &hi).ok())
        }
        None => (None, None),
    };
    Some(DayRow { date, rmse, mae, mape_paper, mape_std, smape_paper, smape_std, picp, mpiw, mse })
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    metrics::error_score(&v).ok()
}

/// Daily tables and aggregates for every model with at least one complete
/// day that also has complete actuals.
pub fn compute_metrics(records: &[ForecastRecord], actuals: &[Actual]) -> MetricsReport {
    let mut truth: BTreeMap<NaiveDate, [Option<f64>; HOURS_PER_DAY]> = BTreeMap::new();
    for a in actuals {
        if a.hour < HOURS_PER_DAY {
            truth.entry(a.date).or_insert([None; HOURS_PER_DAY])[a.hour] = Some(a.price);
        }
    }
    let mut models = BTreeMap::new();
    let mut daily = BTreeMap::new();
    for (model, days) in complete_days(records) {
        let mut rows = Vec::new();
        let (mut mape_terms, mut smape_terms) = (0usize, 0usize);
        for (date, hours) in &days {
            let Some(t) = truth.get(date) else { continue };
            let Some(t): Option<Vec<f64>> = t.iter().copied().collect() else { continue };
            let pred: Vec<f64> = hours.iter().map(|h| h.unwrap().0).collect();
            if let Ok(m) = metrics::daily_metrics(&t, &pred) {
                mape_terms += m.mape_skipped;
                smape_terms += m.smape_skipped;
            }
            if let Some(row) = day_row(*date, &t, hours) {
                rows.push(row);
            }
        }
        if rows.is_empty() {
            continue;
        }
        let mape_paper = mean_of(rows.iter().filter_map(|r| r.mape_paper));
        let smape_paper = mean_of(rows.iter().map(|r| r.smape_paper)).unwrap();
        models.insert(
            model.clone(),
            ModelMetrics {
                days: rows.len(),
                mae: mean_of(rows.iter().map(|r| r.mae)).unwrap(),
                rmse: mean_of(rows.iter().map(|r| r.rmse)).unwrap(),
                mape_paper,
                mape_paper_pct: mape_paper.map(|v| 100.0 * v),
                mape_std: mean_of(rows.iter().filter_map(|r| r.mape_std)),
                smape_paper,
                smape_paper_pct: 100.0 * smape_paper,
                smape_std: mean_of(rows.iter().map(|r| r.smape_std)).unwrap(),
                picp: mean_of(rows.iter().filter_map(|r| r.picp)),
                mpiw: mean_of(rows.iter().filter_map(|r| r.mpiw)),
                mape_skipped_terms: mape_terms,
                smape_skipped_terms: smape_terms,
                mape_skipped_days: rows.iter().filter(|r| r.mape_paper.is_none()).count(),
            },
        );
        daily.insert(model, rows);
    }
    MetricsReport { models, daily }
}

/// DM per calendar year for every model pair on daily MSE, and a Friedman
/// test with Nemenyi comparisons over the days every model forecast.
pub fn compute_tests(m: &MetricsReport) -> TestReport {
    let names: Vec<&String> = m.daily.keys().collect();
    let loss: BTreeMap<&String, BTreeMap<NaiveDate, (f64, f64)>> = m
        .daily
        .iter()
        .map(|(k, rows)| (k, rows.iter().map(|r| (r.date, (r.mse, r.rmse))).collect()))
        .collect();
    let years: BTreeSet<i32> = m.daily.values().flatten().map(|r| r.date.year()).collect();
    let mut dm = Vec::new();
    for &year in &years {
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                let (a, b) = (&loss[names[i]], &loss[names[j]]);
                let common: Vec<NaiveDate> = a.keys().filter(|d| d.year() == year && b.contains_key(d)).copied().collect();
                if common.is_empty() {
                    continue;
                }
                let la: Vec<f64> = common.iter().map(|d| a[d].0).collect();
                let lb: Vec<f64> = common.iter().map(|d| b[d].0).collect();
                let res = metrics::dm_test(&la, &lb);
                dm.push(DmEntry {
                    year,
                    model_a: names[i].clone(),
                    model_b: names[j].clone(),
                    days: common.len(),
                    statistic: res.as_ref().ok().map(|r| r.statistic),
                    p_value: res.as_ref().ok().map(|r| r.p_value),
                    lag: res.as_ref().ok().map(|r| r.lag),
                    error: res.err().map(|e| e.to_string()),
                });
            }
        }
    }
    let (friedman, friedman_error) = if names.len() < 2 {
        (None, Some("need at least two models".to_string()))
    } else {
        let common: Vec<NaiveDate> = loss[names[0]]
            .keys()
            .filter(|d| names.iter().all(|n| loss[*n].contains_key(d)))
            .copied()
            .collect();
        let blocks: Vec<Vec<f64>> = common.iter().map(|d| names.iter().map(|n| loss[*n][d].1).collect()).collect();
        match metrics::friedman_nemenyi(&blocks) {
            Ok(f) => (
                Some(FriedmanEntry {
                    models: names.iter().map(|s| s.to_string()).collect(),
                    blocks: f.blocks,
                    mean_ranks: f.mean_ranks,
                    statistic: f.statistic,
                    p_value: f.p_value,
                    nemenyi: f.nemenyi,
                }),
                None,
            ),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    TestReport { dm, friedman, friedman_error }
}

pub fn compute_report(records: &[ForecastRecord], actuals: &[Actual]) -> Report {
    let metrics = compute_metrics(records, actuals);
    let tests = compute_tests(&metrics);
    Report { metrics, tests }
}

/// Real against predicted prices over one season, hours laid end to end.
pub fn season_svg(title: &str, truth: &[f64], predicted: &[f64]) -> String {
    let (w, h, pad) = (960.0, 360.0, 40.0);
    let n = truth.len().max(2);
    let all = truth.iter().chain(predicted).copied().filter(|v| v.is_finite());
    let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        lo -= 1.0;
        hi += 1.0;
    }
    let x = |i: usize| pad + (w - 2.0 * pad) * i as f64 / (n - 1) as f64;
    let y = |v: f64| h - pad - (h - 2.0 * pad) * (v - lo) / (hi - lo);
    let path = |vals: &[f64]| {
        let mut s = String::new();
        for (i, &v) in vals.iter().enumerate() {
            let _ = write!(s, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, x(i), y(v));
        }
        s
    };
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{pad}" y="24" font-family="sans-serif" font-size="14">{title}</text>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{pad}" y="{:.0}" font-family="sans-serif" font-size="11">{lo:.1} .. {hi:.1} EUR/MWh, {} hours</text>"#,
        h - 12.0,
        truth.len()
    );
    let _ = writeln!(svg, r##"<path d="{}" fill="none" stroke="#222" stroke-width="1"/>"##, path(truth));
    let _ = writeln!(svg, r##"<path d="{}" fill="none" stroke="#d33" stroke-width="1"/>"##, path(predicted));
    svg.push_str("</svg>\n");
    svg
}

/// Writes one plot per (season, model) with data. Returns the file names.
pub fn write_plots(records: &[ForecastRecord], actuals: &[Actual], dir: &Path) -> Result<Vec<PathBuf>> {
    let truth: BTreeMap<(NaiveDate, usize), f64> = actuals.iter().map(|a| ((a.date, a.hour), a.price)).collect();
    let mut series: BTreeMap<(Season, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        if let Some(&t) = truth.get(&(r.date, r.hour)) {
            let e = series.entry((Season::of(r.date), r.model.clone())).or_default();
            e.0.push(t);
            e.1.push(r.point);
        }
    }
    let mut out = Vec::new();
    for ((season, model), (t, p)) in series {
        let path = dir.join(format!("plot_{}_{}.svg", season.name(), model));
        fs::write(&path, season_svg(&format!("{} — {model}", season.name()), &t, &p)).map_err(io_err(&path))?;
        out.push(path);
    }
    Ok(out)
}

/// Writes `metrics.json`, `tests.json` and the plots for the given tables.
pub fn emit_from(records: &[ForecastRecord], actuals: &[Actual], dir: &Path) -> Result<Report> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let report = compute_report(records, actuals);
    let m = dir.join("metrics.json");
    fs::write(&m, serde_json::to_string_pretty(&report.metrics)? + "\n").map_err(io_err(&m))?;
    let t = dir.join("tests.json");
    fs::write(&t, serde_json::to_string_pretty(&report.tests)? + "\n").map_err(io_err(&t))?;
    write_plots(records, actuals, dir)?;
    Ok(report)
}

pub const EXTERNAL_DIR: &str = "external";

/// Writes every artifact of a run. External forecast files are copied into
/// `external/` and take part in metrics and tests.
pub fn emit_report(output: &BacktestOutput, external: &[PathBuf], dir: &Path) -> Result<Report> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_predictions(&output.records, &dir.join("predictions.csv"))?;
    write_actuals(&output.actuals, &dir.join("actuals.csv"))?;
    write_failures(&output.failures, &dir.join("failures.csv"))?;
    let mut all = output.records.clone();
    if !external.is_empty() {
        let ext_dir = dir.join(EXTERNAL_DIR);
        fs::create_dir_all(&ext_dir).map_err(io_err(&ext_dir))?;
        for (i, path) in external.iter().enumerate() {
            let recs = read_predictions(path)?;
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| format!("external_{i}.csv"));
            write_predictions(&recs, &ext_dir.join(name))?;
            all.extend(recs);
        }
    }
    emit_from(&all, &output.actuals, dir)
}

/// Recomputes metrics, tests and plots from a finished run directory.
pub fn report_from_dir(dir: &Path) -> Result<Report> {
    let mut records = read_predictions(&dir.join("predictions.csv"))?;
    let ext_dir = dir.join(EXTERNAL_DIR);
    if ext_dir.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(&ext_dir)
            .map_err(io_err(&ext_dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        files.sort();
        for f in files {
            records.extend(read_predictions(&f)?);
        }
    }
    let actuals = read_actuals(&dir.join("actuals.csv"))?;
    emit_from(&records, &actuals, dir)
}
