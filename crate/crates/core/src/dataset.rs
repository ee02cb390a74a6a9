//! Hourly market data ingestion and the per-hour regression datasets.
//!
//! Raw CSV rows become an [`HourlyPanel`], gaps are filled by linear
//! interpolation, and the panel is reshaped into three day matrices
//! (price, residual load, renewables; `n_days x 24`). From those matrices
//! [`build_hour_dataset`] assembles the 248-dimensional inputs used by the
//! kernel models and [`lear_regressors`] the 247 regressors of the linear
//! benchmark.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Datelike, Duration, FixedOffset, NaiveDate, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HOURS_PER_DAY: usize = 24;
/// Largest lag (in days) referenced by the regressors.
pub const MAX_LAG: usize = 7;
pub const PRICE_LAGS: [usize; 4] = [1, 2, 3, 7];
pub const EXOGENOUS_LAGS: [usize; 3] = [0, 1, 7];

/// Number of lagged/exogenous values: 4 price days, 3 load days, 3 renewables days.
pub const LAGGED_DIM: usize = (PRICE_LAGS.len() + 2 * EXOGENOUS_LAGS.len()) * HOURS_PER_DAY;
pub const WEEKDAY_DIM: usize = 7;
/// Dimension of a kernel-model input: day index, lagged block, weekday dummies.
pub const FEATURE_DIM: usize = 1 + LAGGED_DIM + WEEKDAY_DIM;
/// Dimension of a linear-benchmark regressor row (no day index).
pub const LEAR_DIM: usize = LAGGED_DIM + WEEKDAY_DIM;

pub const PRICE_BLOCK: std::ops::Range<usize> = 1..1 + PRICE_LAGS.len() * HOURS_PER_DAY;
pub const LOAD_BLOCK: std::ops::Range<usize> =
    PRICE_BLOCK.end..PRICE_BLOCK.end + EXOGENOUS_LAGS.len() * HOURS_PER_DAY;
pub const RENEWABLES_BLOCK: std::ops::Range<usize> =
    LOAD_BLOCK.end..LOAD_BLOCK.end + EXOGENOUS_LAGS.len() * HOURS_PER_DAY;
pub const WEEKDAY_BLOCK: std::ops::Range<usize> = RENEWABLES_BLOCK.end..FEATURE_DIM;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("duplicate timestamp {timestamp} at line {line}")]
    DuplicateTimestamp { line: u64, timestamp: String },
    #[error("file contains no data rows")]
    EmptyFile,
    #[error("gap of {run} consecutive missing hours starting {date} hour {hour} exceeds the limit of {max_run}")]
    GapTooLong {
        date: NaiveDate,
        hour: usize,
        run: usize,
        max_run: usize,
    },
    #[error("transform statistics have not been fitted")]
    SpecNotFitted,
    #[error("cannot fit transform for {variable:?}: {reason}")]
    DegenerateStatistics { variable: Variable, reason: String },
    #[error("window of {len} days is shorter than the required {min}")]
    WindowTooShort { len: usize, min: usize },
    #[error("day {day} needs data from day offset {needed_day} which is unavailable")]
    LagUnavailable { day: isize, needed_day: isize },
    #[error("hour {0} is outside [0, 23]")]
    InvalidHour(usize),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variable {
    Price,
    ResidualLoad,
    Renewables,
}

impl Variable {
    pub const ALL: [Variable; 3] = [Variable::Price, Variable::ResidualLoad, Variable::Renewables];

    fn index(self) -> usize {
        match self {
            Variable::Price => 0,
            Variable::ResidualLoad => 1,
            Variable::Renewables => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HourlyRecord {
    pub date: NaiveDate,
    pub hour: usize,
    pub price: f64,
    pub residual_load: f64,
    pub renewables: f64,
}

/// Column names of the input CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub timestamp: String,
    pub price: String,
    pub residual_load: String,
    pub renewables: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            price: "price".into(),
            residual_load: "residual_load".into(),
            renewables: "renewables".into(),
        }
    }
}

/// A local date and hour that is absent from the source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct HourSlot {
    pub date: NaiveDate,
    pub hour: usize,
}

/// Aligned hourly series covering whole local days from `start_date`.
///
/// Missing cells are `None`; their slots are listed in `gaps`. Rows that
/// repeat a local hour at a different UTC offset (the autumn clock change)
/// are dropped and listed in `dropped`.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyPanel {
    pub start_date: NaiveDate,
    pub n_days: usize,
    pub price: Vec<Option<f64>>,
    pub residual_load: Vec<Option<f64>>,
    pub renewables: Vec<Option<f64>>,
    pub gaps: Vec<HourSlot>,
    pub dropped: Vec<HourSlot>,
}

impl HourlyPanel {
    /// Builds a panel from records; the records may be unordered but must not
    /// repeat a (date, hour) pair.
    pub fn from_records(records: &[HourlyRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(DatasetError::EmptyFile);
        }
        let mut cells: BTreeMap<HourSlot, &HourlyRecord> = BTreeMap::new();
        for (i, rec) in records.iter().enumerate() {
            if rec.hour >= HOURS_PER_DAY {
                return Err(DatasetError::InvalidHour(rec.hour));
            }
            let slot = HourSlot { date: rec.date, hour: rec.hour };
            if cells.insert(slot, rec).is_some() {
                return Err(DatasetError::DuplicateTimestamp {
                    line: i as u64 + 1,
                    timestamp: format!("{} hour {}", rec.date, rec.hour),
                });
            }
        }
        let start_date = cells.keys().next().map(|s| s.date).unwrap();
        let end_date = cells.keys().next_back().map(|s| s.date).unwrap();
        let n_days = (end_date - start_date).num_days() as usize + 1;
        let len = n_days * HOURS_PER_DAY;
        let mut panel = HourlyPanel {
            start_date,
            n_days,
            price: vec![None; len],
            residual_load: vec![None; len],
            renewables: vec![None; len],
            gaps: Vec::new(),
            dropped: Vec::new(),
        };
        for (slot, rec) in &cells {
            let idx = (slot.date - start_date).num_days() as usize * HOURS_PER_DAY + slot.hour;
            panel.price[idx] = Some(rec.price);
            panel.residual_load[idx] = Some(rec.residual_load);
            panel.renewables[idx] = Some(rec.renewables);
        }
        panel.gaps = panel.missing_slots();
        Ok(panel)
    }

    pub fn date_of(&self, day: usize) -> NaiveDate {
        self.start_date + Duration::days(day as i64)
    }

    fn slot_of(&self, idx: usize) -> HourSlot {
        HourSlot {
            date: self.date_of(idx / HOURS_PER_DAY),
            hour: idx % HOURS_PER_DAY,
        }
    }

    fn missing_slots(&self) -> Vec<HourSlot> {
        (0..self.price.len())
            .filter(|&i| {
                self.price[i].is_none()
                    || self.residual_load[i].is_none()
                    || self.renewables[i].is_none()
            })
            .map(|i| self.slot_of(i))
            .collect()
    }

    fn series_mut(&mut self, variable: Variable) -> &mut Vec<Option<f64>> {
        match variable {
            Variable::Price => &mut self.price,
            Variable::ResidualLoad => &mut self.residual_load,
            Variable::Renewables => &mut self.renewables,
        }
    }

    pub fn series(&self, variable: Variable) -> &[Option<f64>] {
        match variable {
            Variable::Price => &self.price,
            Variable::ResidualLoad => &self.residual_load,
            Variable::Renewables => &self.renewables,
        }
    }

    /// Reshapes the panel into day matrices. Cells still missing are stored
    /// as NaN and their days are reported incomplete.
    pub fn to_day_panels(&self) -> DayPanels {
        let to_matrix = |series: &[Option<f64>]| DayMatrix {
            start_date: self.start_date,
            values: series.iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
        };
        DayPanels {
            price: to_matrix(&self.price),
            load: to_matrix(&self.residual_load),
            renewables: to_matrix(&self.renewables),
        }
    }
}

/// Reads an hourly CSV file.
///
/// Timestamps are ISO-8601 local times with an explicit UTC offset. The local
/// date and hour place the row; on the autumn clock change the repeated local
/// hour is dropped (recorded in `dropped`) and on the spring change the
/// skipped hour becomes an ordinary gap.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<HourlyPanel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, schema)
}

pub fn read_csv<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<HourlyPanel> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| DatasetError::MalformedRow { line: 1, reason: e.to_string() })?
        .clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| DatasetError::MalformedRow {
            line: 1,
            reason: format!("missing column '{name}'"),
        })
    };
    let ts_col = column(&schema.timestamp)?;
    let price_col = column(&schema.price)?;
    let load_col = column(&schema.residual_load)?;
    let ren_col = column(&schema.renewables)?;

    struct Row {
        line: u64,
        instant: DateTime<FixedOffset>,
        record: HourlyRecord,
    }
    let mut rows = Vec::new();
    for (i, result) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = result.map_err(|e| DatasetError::MalformedRow { line, reason: e.to_string() })?;
        let field = |col: usize| {
            rec.get(col).ok_or_else(|| DatasetError::MalformedRow {
                line,
                reason: format!("missing field {col}"),
            })
        };
        let number = |col: usize| -> Result<f64> {
            let raw = field(col)?;
            let v: f64 = raw.parse().map_err(|_| DatasetError::MalformedRow {
                line,
                reason: format!("'{raw}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::MalformedRow { line, reason: format!("non-finite value '{raw}'") });
            }
            Ok(v)
        };
        let raw_ts = field(ts_col)?;
        let instant = DateTime::parse_from_rfc3339(raw_ts).map_err(|e| DatasetError::MalformedRow {
            line,
            reason: format!("bad timestamp '{raw_ts}': {e}"),
        })?;
        let local = instant.naive_local();
        if local.minute() != 0 || local.second() != 0 {
            return Err(DatasetError::MalformedRow {
                line,
                reason: format!("timestamp '{raw_ts}' is not on the hour"),
            });
        }
        rows.push(Row {
            line,
            instant,
            record: HourlyRecord {
                date: local.date(),
                hour: local.hour() as usize,
                price: number(price_col)?,
                residual_load: number(load_col)?,
                renewables: number(ren_col)?,
            },
        });
    }
    if rows.is_empty() {
        return Err(DatasetError::EmptyFile);
    }
    rows.sort_by_key(|r| (r.instant, r.line));
    for pair in rows.windows(2) {
        if pair[0].instant == pair[1].instant {
            return Err(DatasetError::DuplicateTimestamp {
                line: pair[1].line,
                timestamp: pair[1].instant.to_rfc3339(),
            });
        }
    }
    let mut seen: BTreeMap<HourSlot, FixedOffset> = BTreeMap::new();
    let mut kept = Vec::with_capacity(rows.len());
    let mut dropped = Vec::new();
    for row in rows {
        let slot = HourSlot { date: row.record.date, hour: row.record.hour };
        match seen.get(&slot) {
            Some(offset) if *offset != *row.instant.offset() => dropped.push(slot),
            Some(_) => {
                return Err(DatasetError::DuplicateTimestamp {
                    line: row.line,
                    timestamp: row.instant.to_rfc3339(),
                })
            }
            None => {
                seen.insert(slot, *row.instant.offset());
                kept.push(row.record);
            }
        }
    }
    let mut panel = HourlyPanel::from_records(&kept)?;
    panel.dropped = dropped;
    Ok(panel)
}

/// Fills gap runs of at most `max_run` hours by linear interpolation between
/// the neighbouring observations. Longer runs, and runs touching either end
/// of the panel, fail with [`DatasetError::GapTooLong`].
pub fn impute_gaps(panel: &HourlyPanel, max_run: usize) -> Result<HourlyPanel> {
    let (filled, unresolved) = impute_gaps_partial(panel, max_run);
    match unresolved.first() {
        Some(run) => Err(DatasetError::GapTooLong {
            date: run.start.date,
            hour: run.start.hour,
            run: run.len,
            max_run,
        }),
        None => Ok(filled),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapRun {
    pub start: HourSlot,
    pub len: usize,
}

/// Like [`impute_gaps`] but leaves runs that cannot be filled in place and
/// returns them instead of failing. Days touched by such runs end up
/// incomplete in the day matrices and are excluded from training.
pub fn impute_gaps_partial(panel: &HourlyPanel, max_run: usize) -> (HourlyPanel, Vec<GapRun>) {
    let mut out = panel.clone();
    let mut unresolved: BTreeMap<(HourSlot, usize), ()> = BTreeMap::new();
    for variable in Variable::ALL {
        let series = out.series_mut(variable);
        let n = series.len();
        let mut i = 0;
        while i < n {
            if series[i].is_some() {
                i += 1;
                continue;
            }
            let start = i;
            while i < n && series[i].is_none() {
                i += 1;
            }
            let len = i - start;
            let bounded = start > 0 && i < n;
            if bounded && len <= max_run {
                let left = series[start - 1].unwrap();
                let right = series[i].unwrap();
                for k in 0..len {
                    let w = (k + 1) as f64 / (len + 1) as f64;
                    series[start + k] = Some(left + w * (right - left));
                }
            } else {
                unresolved.insert((panel.slot_of(start), len), ());
            }
        }
    }
    out.gaps = out.missing_slots();
    let runs = unresolved.into_keys().map(|(start, len)| GapRun { start, len }).collect();
    (out, runs)
}

/// One variable arranged as `n_days x 24`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DayMatrix {
    pub start_date: NaiveDate,
    pub values: Vec<f64>,
}

impl DayMatrix {
    pub fn from_rows(start_date: NaiveDate, rows: &[[f64; HOURS_PER_DAY]]) -> Self {
        Self {
            start_date,
            values: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn n_days(&self) -> usize {
        self.values.len() / HOURS_PER_DAY
    }

    pub fn day(&self, day: usize) -> &[f64] {
        &self.values[day * HOURS_PER_DAY..(day + 1) * HOURS_PER_DAY]
    }

    pub fn day_mut(&mut self, day: usize) -> &mut [f64] {
        &mut self.values[day * HOURS_PER_DAY..(day + 1) * HOURS_PER_DAY]
    }

    pub fn get(&self, day: usize, hour: usize) -> f64 {
        self.values[day * HOURS_PER_DAY + hour]
    }

    pub fn is_complete(&self, day: usize) -> bool {
        self.day(day).iter().all(|v| v.is_finite())
    }

    pub fn date_of(&self, day: usize) -> NaiveDate {
        self.start_date + Duration::days(day as i64)
    }
}

/// The price, residual-load and renewables day matrices on a common calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct DayPanels {
    pub price: DayMatrix,
    pub load: DayMatrix,
    pub renewables: DayMatrix,
}

impl DayPanels {
    pub fn n_days(&self) -> usize {
        self.price.n_days()
    }

    pub fn start_date(&self) -> NaiveDate {
        self.price.start_date
    }

    pub fn date_of(&self, day: usize) -> NaiveDate {
        self.price.date_of(day)
    }

    pub fn day_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start_date()).num_days();
        (offset >= 0 && (offset as usize) < self.n_days()).then_some(offset as usize)
    }

    pub fn matrix(&self, variable: Variable) -> &DayMatrix {
        match variable {
            Variable::Price => &self.price,
            Variable::ResidualLoad => &self.load,
            Variable::Renewables => &self.renewables,
        }
    }

    pub fn matrix_mut(&mut self, variable: Variable) -> &mut DayMatrix {
        match variable {
            Variable::Price => &mut self.price,
            Variable::ResidualLoad => &mut self.load,
            Variable::Renewables => &mut self.renewables,
        }
    }

    pub fn exogenous_complete(&self, day: usize) -> bool {
        self.load.is_complete(day) && self.renewables.is_complete(day)
    }

    /// Days `[first, first + len)` as a new panel set; `None` when the range
    /// runs past the end.
    pub fn slice(&self, first: usize, len: usize) -> Option<DayPanels> {
        if first + len > self.n_days() {
            return None;
        }
        let cut = |m: &DayMatrix| DayMatrix {
            start_date: m.date_of(first),
            values: m.values[first * HOURS_PER_DAY..(first + len) * HOURS_PER_DAY].to_vec(),
        };
        Some(DayPanels { price: cut(&self.price), load: cut(&self.load), renewables: cut(&self.renewables) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
}

/// Per-variable signed-log and standardization settings.
///
/// The signed log `s(x) = sign(x) ln(1 + |x|)` is odd and invertible, so
/// negative prices pass through. Statistics are fitted on a training window
/// and then frozen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub signed_log: [bool; 3],
    pub standardize: bool,
    stats: Option<[Standardization; 3]>,
}

impl Default for TransformSpec {
    fn default() -> Self {
        Self::new([true; 3], true)
    }
}

pub fn signed_log(x: f64) -> f64 {
    x.signum() * x.abs().ln_1p()
}

pub fn signed_exp(z: f64) -> f64 {
    z.signum() * z.abs().exp_m1()
}

impl TransformSpec {
    pub fn new(signed_log: [bool; 3], standardize: bool) -> Self {
        Self { signed_log, standardize, stats: None }
    }

    /// Identity transform, already fitted.
    pub fn identity() -> Self {
        Self::new([false; 3], false)
    }

    /// A spec with explicit standardization statistics.
    pub fn with_stats(signed_log: [bool; 3], stats: [Standardization; 3]) -> Result<Self> {
        for (variable, s) in Variable::ALL.iter().zip(stats.iter()) {
            if !(s.std > 0.0 && s.std.is_finite() && s.mean.is_finite()) {
                return Err(DatasetError::DegenerateStatistics {
                    variable: *variable,
                    reason: format!("std {} must be positive", s.std),
                });
            }
        }
        Ok(Self { signed_log, standardize: true, stats: Some(stats) })
    }

    pub fn is_fitted(&self) -> bool {
        !self.standardize || self.stats.is_some()
    }

    pub fn stats(&self) -> Option<&[Standardization; 3]> {
        self.stats.as_ref()
    }

    /// Fits standardization statistics on days `[first, first + len)` using
    /// every finite cell of each variable.
    pub fn fit(&mut self, panels: &DayPanels, first: usize, len: usize) -> Result<()> {
        if !self.standardize {
            return Ok(());
        }
        let mut stats = [Standardization { mean: 0.0, std: 1.0 }; 3];
        for variable in Variable::ALL {
            let m = panels.matrix(variable);
            let values: Vec<f64> = (first..first + len)
                .flat_map(|d| m.day(d).iter().copied())
                .filter(|v| v.is_finite())
                .map(|v| self.log_part(variable, v))
                .collect();
            if values.len() < 2 {
                return Err(DatasetError::DegenerateStatistics {
                    variable,
                    reason: "fewer than two observations".into(),
                });
            }
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let std = var.sqrt();
            if !(std > 0.0) {
                return Err(DatasetError::DegenerateStatistics {
                    variable,
                    reason: "constant over the training window".into(),
                });
            }
            stats[variable.index()] = Standardization { mean, std };
        }
        self.stats = Some(stats);
        Ok(())
    }

    fn log_part(&self, variable: Variable, x: f64) -> f64 {
        if self.signed_log[variable.index()] {
            signed_log(x)
        } else {
            x
        }
    }

    pub fn forward(&self, variable: Variable, x: f64) -> Result<f64> {
        let z = self.log_part(variable, x);
        if !self.standardize {
            return Ok(z);
        }
        let s = self.stats.as_ref().ok_or(DatasetError::SpecNotFitted)?[variable.index()];
        Ok((z - s.mean) / s.std)
    }

    pub fn inverse(&self, variable: Variable, y: f64) -> Result<f64> {
        let z = if self.standardize {
            let s = self.stats.as_ref().ok_or(DatasetError::SpecNotFitted)?[variable.index()];
            y * s.std + s.mean
        } else {
            y
        };
        Ok(if self.signed_log[variable.index()] { signed_exp(z) } else { z })
    }
}

/// Applies `spec` to every cell of the three matrices (NaN stays NaN).
pub fn forward_transform(panels: &DayPanels, spec: &TransformSpec) -> Result<DayPanels> {
    if !spec.is_fitted() {
        return Err(DatasetError::SpecNotFitted);
    }
    let mut out = panels.clone();
    for variable in Variable::ALL {
        for v in out.matrix_mut(variable).values.iter_mut() {
            if v.is_finite() {
                *v = spec.forward(variable, *v)?;
            }
        }
    }
    Ok(out)
}

pub fn inverse_transform(panels: &DayPanels, spec: &TransformSpec) -> Result<DayPanels> {
    if !spec.is_fitted() {
        return Err(DatasetError::SpecNotFitted);
    }
    let mut out = panels.clone();
    for variable in Variable::ALL {
        for v in out.matrix_mut(variable).values.iter_mut() {
            if v.is_finite() {
                *v = spec.inverse(variable, *v)?;
            }
        }
    }
    Ok(out)
}

/// A 248-dimensional kernel-model input.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn day_index(&self) -> f64 {
        self.0[0]
    }

    pub fn price_lags(&self) -> &[f64] {
        &self.0[PRICE_BLOCK]
    }

    pub fn load_terms(&self) -> &[f64] {
        &self.0[LOAD_BLOCK]
    }

    pub fn renewables_terms(&self) -> &[f64] {
        &self.0[RENEWABLES_BLOCK]
    }

    pub fn weekday_dummies(&self) -> &[f64] {
        &self.0[WEEKDAY_BLOCK]
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A contiguous range of days inside a [`DayPanels`]; the first
/// [`MAX_LAG`] days only supply lags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DayWindow {
    pub start: usize,
    pub len: usize,
}

/// Maps a day number to the scaled day index: the first training day is 0 and
/// the last is 1; later days extrapolate past 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayIndexScale {
    pub origin: usize,
    pub span: f64,
}

impl DayIndexScale {
    pub fn over(first: usize, last: usize) -> Self {
        let span = last.saturating_sub(first).max(1) as f64;
        Self { origin: first, span }
    }

    pub fn scale(&self, day: usize) -> f64 {
        (day as f64 - self.origin as f64) / self.span
    }
}

fn weekday_one_hot(date: NaiveDate, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    out[date.weekday().num_days_from_monday() as usize] = 1.0;
}

/// Writes the 247 lagged, exogenous and weekday values describing `day`.
/// Price values of `day` itself are never read.
fn write_regressors(panels: &DayPanels, day: usize, out: &mut Vec<f64>) -> Result<()> {
    let needed = |lag: usize| -> Result<usize> {
        day.checked_sub(lag).ok_or(DatasetError::LagUnavailable {
            day: day as isize,
            needed_day: day as isize - lag as isize,
        })
    };
    let day_limit = panels.n_days();
    if day >= day_limit {
        return Err(DatasetError::LagUnavailable { day: day as isize, needed_day: day as isize });
    }
    for lag in PRICE_LAGS {
        let d = needed(lag)?;
        if !panels.price.is_complete(d) {
            return Err(DatasetError::LagUnavailable { day: day as isize, needed_day: d as isize });
        }
        out.extend_from_slice(panels.price.day(d));
    }
    for matrix in [&panels.load, &panels.renewables] {
        for lag in EXOGENOUS_LAGS {
            let d = needed(lag)?;
            if !matrix.is_complete(d) {
                return Err(DatasetError::LagUnavailable { day: day as isize, needed_day: d as isize });
            }
            out.extend_from_slice(matrix.day(d));
        }
    }
    let start = out.len();
    out.resize(start + WEEKDAY_DIM, 0.0);
    weekday_one_hot(panels.date_of(day), &mut out[start..]);
    Ok(())
}

/// The kernel-model input describing `day`.
pub fn feature_vector(panels: &DayPanels, day: usize, scale: &DayIndexScale) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(FEATURE_DIM);
    values.push(scale.scale(day));
    write_regressors(panels, day, &mut values)?;
    debug_assert_eq!(values.len(), FEATURE_DIM);
    Ok(FeatureVector(values))
}

/// The linear-benchmark regressors describing `day` (unstandardized).
pub fn lear_regressors(panels: &DayPanels, day: usize) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(LEAR_DIM);
    write_regressors(panels, day, &mut values)?;
    Ok(values)
}

/// Training pairs for one hour of the day.
#[derive(Debug, Clone, PartialEq)]
pub struct HourDataset {
    pub hour: usize,
    pub inputs: Vec<FeatureVector>,
    pub targets: Vec<f64>,
    /// Day number of each pair.
    pub days: Vec<usize>,
    /// Days in the window skipped because an input or target was missing.
    pub skipped: Vec<usize>,
    pub scale: DayIndexScale,
}

impl HourDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input_slices(&self) -> Vec<&[f64]> {
        self.inputs.iter().map(|f| f.as_slice()).collect()
    }
}

fn check_window(panels: &DayPanels, hour: usize, window: DayWindow) -> Result<()> {
    if hour >= HOURS_PER_DAY {
        return Err(DatasetError::InvalidHour(hour));
    }
    if window.len < MAX_LAG + 1 {
        return Err(DatasetError::WindowTooShort { len: window.len, min: MAX_LAG + 1 });
    }
    let end = window.start + window.len;
    if end > panels.n_days() {
        return Err(DatasetError::LagUnavailable {
            day: end as isize - 1,
            needed_day: end as isize - 1,
        });
    }
    Ok(())
}

/// Assembles `(t_i, P_h^(i))` for every day `i` of `window` after its first
/// seven days. Days whose inputs or target are incomplete are skipped.
pub fn build_hour_dataset(panels: &DayPanels, hour: usize, window: DayWindow) -> Result<HourDataset> {
    check_window(panels, hour, window)?;
    let first = window.start + MAX_LAG;
    let last = window.start + window.len - 1;
    let scale = DayIndexScale::over(first, last);
    let mut out = HourDataset {
        hour,
        inputs: Vec::with_capacity(last + 1 - first),
        targets: Vec::with_capacity(last + 1 - first),
        days: Vec::with_capacity(last + 1 - first),
        skipped: Vec::new(),
        scale,
    };
    for day in first..=last {
        let target = panels.price.get(day, hour);
        match feature_vector(panels, day, &scale) {
            Ok(fv) if target.is_finite() && panels.exogenous_complete(day) => {
                out.inputs.push(fv);
                out.targets.push(target);
                out.days.push(day);
            }
            _ => out.skipped.push(day),
        }
    }
    Ok(out)
}
