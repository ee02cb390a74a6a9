//! Rolling day-ahead backtest over a trailing window.
//!
//! For every target day the panels are cut to the window plus its lead-in,
//! the target day's prices are masked, the transform is fitted on the
//! training days only, and 24 per-hour models of each kind are conditioned
//! and queried. Hyperparameters are searched once per refit block. Work is
//! spread over a rayon pool and merged in (date, hour, model) order.

use std::path::PathBuf;
use std::time::Instant;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{BacktestConfig, ConfigError, ModelTag};
use crate::conformal::{self, NonconformityScores, TargetStats};
use crate::dataset::{
    self, DatasetError, DayIndexScale, DayPanels, DayWindow, TransformSpec, Variable, HOURS_PER_DAY, MAX_LAG,
};
use crate::gpr::GprModel;
use crate::hybrid::{self, Scale, Tagged};
use crate::kernels::KernelParams;
use crate::lear::{self, LearModel};
use crate::svr::{self, SvrConfig, SvrModel};

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("first target day {target} needs history from {needed}, but data start on {available}")]
    InsufficientHistory {
        target: NaiveDate,
        needed: NaiveDate,
        available: NaiveDate,
    },
    #[error("date {0} is outside the data")]
    OutOfRange(NaiveDate),
    #[error("cannot build worker pool: {0}")]
    Pool(String),
    #[error("model fit failed: {0}")]
    Model(String),
}

pub type Result<T> = std::result::Result<T, BacktestError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub date: NaiveDate,
    pub hour: usize,
    pub model: String,
    /// Raw scale (EUR/MWh).
    pub point: f64,
    pub lb: Option<f64>,
    pub ub: Option<f64>,
    pub runtime_ms: Option<f64>,
    /// The model output before back-transformation; kept in memory only.
    #[serde(skip)]
    pub point_transformed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub date: NaiveDate,
    pub hour: usize,
    pub model: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Actual {
    pub date: NaiveDate,
    pub hour: usize,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestOutput {
    pub models: Vec<ModelTag>,
    pub records: Vec<ForecastRecord>,
    pub actuals: Vec<Actual>,
    pub failures: Vec<Failure>,
}

/// Reads, imputes and reshapes the configured data file. Gaps longer than
/// `impute_max_run` stay missing; the affected days are skipped later.
pub fn load_panels(config: &BacktestConfig) -> Result<DayPanels> {
    let panel = dataset::load_csv(&config.data.path, &config.data.schema)?;
    let (panel, _) = dataset::impute_gaps_partial(&panel, config.data.impute_max_run);
    Ok(panel.to_day_panels())
}

pub fn run_backtest(config: &BacktestConfig) -> Result<BacktestOutput> {
    config.validate()?;
    let panels = load_panels(config)?;
    run_on_panels(&panels, config)
}

/// Runs `f` inside a pool capped by the configured thread count.
pub fn with_pool<T: Send>(config: &BacktestConfig, f: impl FnOnce() -> T + Send) -> Result<T> {
    match config.effective_threads() {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| BacktestError::Pool(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// A stable per-cell seed.
pub fn cell_seed(seed: u64, date: NaiveDate, hour: usize) -> u64 {
    let mut z = seed ^ ((date.num_days_from_ce() as u64) << 8 | hour as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
struct Need {
    gpr: bool,
    svr: bool,
    lear: bool,
}

impl Need {
    fn of(models: &[ModelTag]) -> Self {
        let has = |m| models.contains(&m);
        let hybrid = has(ModelTag::Hybrid);
        Self { gpr: has(ModelTag::Gpr) || hybrid, svr: has(ModelTag::Svr) || hybrid, lear: has(ModelTag::Lear) }
    }
}

/// A target day's transformed, price-masked view of the data.
pub struct DayContext {
    pub date: NaiveDate,
    pub spec: TransformSpec,
    pub panels: DayPanels,
    /// Index of the target day inside `panels`.
    pub target: usize,
    pub window: DayWindow,
}

/// Cuts `[day - window - 7, day + extra_days]`, masks every price from
/// `day` on, fits the transform on the training days and applies it.
pub fn prepare_day(
    panels: &DayPanels,
    day: usize,
    extra_days: usize,
    config: &BacktestConfig,
) -> std::result::Result<DayContext, DatasetError> {
    let lead = config.window_days + MAX_LAG;
    let first = day.checked_sub(lead).ok_or(DatasetError::LagUnavailable {
        day: day as isize,
        needed_day: day as isize - lead as isize,
    })?;
    let mut slice = panels
        .slice(first, lead + 1 + extra_days)
        .ok_or(DatasetError::LagUnavailable { day: day as isize, needed_day: (day + extra_days) as isize })?;
    for d in lead..slice.n_days() {
        slice.price.day_mut(d).fill(f64::NAN);
    }
    let mut spec = config.transform.spec();
    spec.fit(&slice, 0, lead)?;
    let transformed = dataset::forward_transform(&slice, &spec)?;
    Ok(DayContext {
        date: panels.date_of(day),
        spec,
        panels: transformed,
        target: lead,
        window: DayWindow { start: 0, len: lead },
    })
}

/// Hyperparameters searched at the start of a refit block for one hour.
#[derive(Debug, Clone, Default)]
struct Hyper {
    gpr: Option<std::result::Result<KernelParams, String>>,
    svr: Option<std::result::Result<SvrConfig, String>>,
    lear: Option<std::result::Result<f64, String>>,
}

fn search_hyper(ctx: &DayContext, hour: usize, config: &BacktestConfig, need: Need) -> Hyper {
    let mut out = Hyper::default();
    let ds = dataset::build_hour_dataset(&ctx.panels, hour, ctx.window).map_err(|e| e.to_string());
    if need.gpr {
        out.gpr = Some(ds.as_ref().map_err(Clone::clone).and_then(|ds| {
            GprModel::fit(&ds.inputs, &ds.targets, &config.gpr, cell_seed(config.seed, ctx.date, hour))
                .map(|m| m.params)
                .map_err(|e| format!("hyperparameter fit: {e}"))
        }));
    }
    if need.svr {
        out.svr = Some(ds.as_ref().map_err(Clone::clone).and_then(|ds| match &config.svr_grid {
            Some(grid) => svr::grid_search(&ds.inputs, &ds.targets, config.svr_holdout_days, grid, &config.svr)
                .map(|g| g.best)
                .map_err(|e| format!("grid search: {e}")),
            None => Ok(config.svr),
        }));
    }
    if need.lear {
        out.lear = Some(
            lear::build_design(&ctx.panels, hour, ctx.window)
                .and_then(|d| lear::select_lambda(&d.rows, &d.targets, None, &config.lear))
                .map(|s| s.lambda)
                .map_err(|e| format!("lambda selection: {e}")),
        );
    }
    out
}

struct SvrFit {
    model: SvrModel,
    scores: NonconformityScores,
    stats: TargetStats,
}

/// Models conditioned on one day's window for one hour.
struct HourModels {
    scale: Option<DayIndexScale>,
    gpr: Option<GprModel>,
    svr: Option<SvrFit>,
    lear: Option<LearModel>,
    fit_ms: [f64; 3],
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn fit_svr(inputs: &[dataset::FeatureVector], targets: &[f64], cfg: &SvrConfig, config: &BacktestConfig) -> std::result::Result<SvrFit, String> {
    let model = SvrModel::solve_dual(inputs, targets, cfg).map_err(|e| e.to_string())?;
    let stats = TargetStats::of(targets);
    let scores = if config.conformal.split {
        let n = targets.len();
        let cal = config.conformal.calibration_days.min(n / 2).max(1);
        let split = n - cal;
        let proper = SvrModel::solve_dual(&inputs[..split], &targets[..split], cfg).map_err(|e| e.to_string())?;
        let pred = proper.predict(&inputs[split..]).map_err(|e| e.to_string())?;
        conformal::scores(&targets[split..], &pred)
    } else {
        let pred = model.predict(inputs).map_err(|e| e.to_string())?;
        conformal::scores(targets, &pred)
    }
    .map_err(|e| e.to_string())?;
    Ok(SvrFit { model, scores, stats })
}

fn fit_hour(ctx: &DayContext, hour: usize, hyper: &Hyper, config: &BacktestConfig, failures: &mut Vec<(ModelTag, String)>) -> HourModels {
    let mut out = HourModels { scale: None, gpr: None, svr: None, lear: None, fit_ms: [0.0; 3] };
    let ds = match dataset::build_hour_dataset(&ctx.panels, hour, ctx.window) {
        Ok(ds) => Some(ds),
        Err(e) => {
            for (wanted, m) in [(hyper.gpr.is_some(), ModelTag::Gpr), (hyper.svr.is_some(), ModelTag::Svr)] {
                if wanted {
                    failures.push((m, format!("training set: {e}")));
                }
            }
            None
        }
    };
    if let Some(ds) = &ds {
        out.scale = Some(ds.scale);
        if let Some(h) = &hyper.gpr {
            let t = Instant::now();
            match h.clone().and_then(|p| GprModel::condition(&ds.inputs, &ds.targets, p, config.gpr.kind).map_err(|e| e.to_string())) {
                Ok(m) => out.gpr = Some(m),
                Err(e) => failures.push((ModelTag::Gpr, e)),
            }
            out.fit_ms[0] = ms_since(t);
        }
        if let Some(h) = &hyper.svr {
            let t = Instant::now();
            match h.clone().and_then(|c| fit_svr(&ds.inputs, &ds.targets, &c, config)) {
                Ok(m) => out.svr = Some(m),
                Err(e) => failures.push((ModelTag::Svr, e)),
            }
            out.fit_ms[1] = ms_since(t);
        }
    }
    if let Some(h) = &hyper.lear {
        let t = Instant::now();
        let fitted = h.clone().and_then(|lambda| {
            lear::build_design(&ctx.panels, hour, ctx.window)
                .and_then(|d| LearModel::fit(&d, lambda, &config.lear))
                .map_err(|e| e.to_string())
        });
        match fitted {
            Ok(m) => out.lear = Some(m),
            Err(e) => failures.push((ModelTag::Lear, e)),
        }
        out.fit_ms[2] = ms_since(t);
    }
    out
}

/// What each model saw as the query day's data.
struct Query<'a> {
    gpr: Option<&'a DayPanels>,
    svr: Option<&'a DayPanels>,
    lear: Option<&'a DayPanels>,
    day: usize,
    date: NaiveDate,
    /// Hour index into the forecast horizon (0..48), used for RNG streams.
    lead_hour: usize,
}

#[derive(Default)]
struct CellOut {
    records: Vec<ForecastRecord>,
    failures: Vec<Failure>,
    /// Transformed point forecasts of gpr, svr and lear.
    transformed: [Option<f64>; 3],
}

fn back(spec: &TransformSpec, y: f64) -> std::result::Result<f64, String> {
    spec.inverse(Variable::Price, y).map_err(|e| e.to_string())
}

fn predict_cell(
    ctx: &DayContext,
    hour: usize,
    models: &HourModels,
    query: &Query,
    config: &BacktestConfig,
    include_fit_time: bool,
) -> CellOut {
    let mut out = CellOut::default();
    let enabled = |m: ModelTag| config.models.contains(&m);
    let runtime = |fit: f64, t: Instant| config.record_runtime.then(|| if include_fit_time { fit } else { 0.0 } + ms_since(t));
    let fail = |out: &mut CellOut, m: ModelTag, reason: String| {
        out.failures.push(Failure { date: query.date, hour, model: m.name().into(), reason });
    };
    let spec = &ctx.spec;
    let mut gpr_raw = None;
    let mut svr_raw = None;

    if let (Some(model), Some(panels), Some(scale)) = (&models.gpr, query.gpr, &models.scale) {
        let t = Instant::now();
        let res = dataset::feature_vector(panels, query.day, scale)
            .map_err(|e| e.to_string())
            .and_then(|fv| model.predict(&[fv], config.gpr.alpha).map_err(|e| e.to_string()))
            .and_then(|p| Ok((p[0].mean, back(spec, p[0].mean)?, back(spec, p[0].lower)?, back(spec, p[0].upper)?)));
        match res {
            Ok((yt, point, lb, ub)) => {
                out.transformed[0] = Some(yt);
                gpr_raw = Some((point, Some((lb, ub)), runtime(models.fit_ms[0], t)));
                if enabled(ModelTag::Gpr) {
                    out.records.push(ForecastRecord {
                        date: query.date,
                        hour,
                        model: ModelTag::Gpr.name().into(),
                        point,
                        lb: Some(lb),
                        ub: Some(ub),
                        runtime_ms: runtime(models.fit_ms[0], t),
                        point_transformed: Some(yt),
                    });
                }
            }
            Err(e) => fail(&mut out, ModelTag::Gpr, e),
        }
    }

    if let (Some(fit), Some(panels), Some(scale)) = (&models.svr, query.svr, &models.scale) {
        let t = Instant::now();
        let res = dataset::feature_vector(panels, query.day, scale)
            .map_err(|e| e.to_string())
            .and_then(|fv| fit.model.predict(&[fv]).map_err(|e| e.to_string()))
            .and_then(|p| Ok((p[0], back(spec, p[0])?)));
        match res {
            Ok((yt, point)) => {
                out.transformed[1] = Some(yt);
                // a failed interval keeps the point forecast
                let mut rng = conformal::stream_rng(config.seed, ctx.date.num_days_from_ce() as i64, query.lead_hour as u32);
                let interval = conformal::interval_bootstrap(yt, &fit.scores, &fit.stats, &config.conformal, &mut rng)
                    .map_err(|e| format!("conformal interval: {e}"))
                    .and_then(|iv| Ok((back(spec, iv.lower)?, back(spec, iv.upper)?)));
                let interval = match interval {
                    Ok(iv) => Some(iv),
                    Err(e) => {
                        fail(&mut out, ModelTag::Svr, e);
                        None
                    }
                };
                let rt = runtime(models.fit_ms[1], t);
                svr_raw = Some((point, interval, rt));
                if enabled(ModelTag::Svr) {
                    out.records.push(ForecastRecord {
                        date: query.date,
                        hour,
                        model: ModelTag::Svr.name().into(),
                        point,
                        lb: interval.map(|iv| iv.0),
                        ub: interval.map(|iv| iv.1),
                        runtime_ms: rt,
                        point_transformed: Some(yt),
                    });
                }
            }
            Err(e) => fail(&mut out, ModelTag::Svr, e),
        }
    }

    if enabled(ModelTag::Hybrid) {
        match (gpr_raw, svr_raw) {
            (Some(g), Some(s)) => {
                let raw = |v| Tagged { value: v, scale: Scale::Raw };
                let res = hybrid::combine_point(raw(g.0), raw(s.0), &config.hybrid).and_then(|p| {
                    let iv = match (g.1, s.1) {
                        (Some(gi), Some(si)) => Some(hybrid::combine_interval(gi, si, &config.hybrid)?),
                        _ => None,
                    };
                    Ok((p.value, iv))
                });
                match res {
                    Ok((point, iv)) => out.records.push(ForecastRecord {
                        date: query.date,
                        hour,
                        model: ModelTag::Hybrid.name().into(),
                        point,
                        lb: iv.map(|iv| iv.0),
                        ub: iv.map(|iv| iv.1),
                        runtime_ms: match (g.2, s.2) {
                            (Some(a), Some(b)) => Some(a + b),
                            _ => None,
                        },
                        // a degenerate weight passes the component through untouched
                        point_transformed: if config.hybrid.lambda2 == 0.0 {
                            out.transformed[0]
                        } else if config.hybrid.lambda1 == 0.0 {
                            out.transformed[1]
                        } else {
                            spec.forward(Variable::Price, point).ok()
                        },
                    }),
                    Err(e) => fail(&mut out, ModelTag::Hybrid, e.to_string()),
                }
            }
            _ => fail(&mut out, ModelTag::Hybrid, "a component forecast is missing".into()),
        }
    }

    if let (Some(model), Some(panels)) = (&models.lear, query.lear) {
        let t = Instant::now();
        let res = dataset::lear_regressors(panels, query.day)
            .map_err(|e| e.to_string())
            .and_then(|r| model.predict(&r).map_err(|e| e.to_string()))
            .and_then(|yt| Ok((yt, back(spec, yt)?)));
        match res {
            Ok((yt, point)) => {
                out.transformed[2] = Some(yt);
                out.records.push(ForecastRecord {
                    date: query.date,
                    hour,
                    model: ModelTag::Lear.name().into(),
                    point,
                    lb: None,
                    ub: None,
                    runtime_ms: runtime(models.fit_ms[2], t),
                    point_transformed: Some(yt),
                });
            }
            Err(e) => fail(&mut out, ModelTag::Lear, e),
        }
    }
    out
}

/// Replaces the masked target-day prices with a model's own forecasts.
fn with_own_forecast(ctx: &DayContext, cells: &[&CellOut], slot: usize) -> Option<DayPanels> {
    let values: Option<Vec<f64>> = cells.iter().map(|c| c.transformed[slot]).collect();
    let values = values?;
    let mut panels = ctx.panels.clone();
    panels.price.day_mut(ctx.target).copy_from_slice(&values);
    Some(panels)
}

fn forecast_day(
    panels: &DayPanels,
    day: usize,
    second_day: bool,
    hypers: &[Hyper],
    config: &BacktestConfig,
) -> (Vec<ForecastRecord>, Vec<Failure>) {
    let date = panels.date_of(day);
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let ctx = match prepare_day(panels, day, second_day as usize, config) {
        Ok(ctx) => ctx,
        Err(e) => {
            let days = if second_day { vec![date, date.succ_opt().unwrap()] } else { vec![date] };
            for d in days {
                for hour in 0..HOURS_PER_DAY {
                    for m in &config.models {
                        failures.push(Failure { date: d, hour, model: m.name().into(), reason: format!("day preparation: {e}") });
                    }
                }
            }
            return (records, failures);
        }
    };
    let stage: Vec<(HourModels, CellOut)> = (0..HOURS_PER_DAY)
        .into_par_iter()
        .map(|hour| {
            let mut fit_failures = Vec::new();
            let models = fit_hour(&ctx, hour, &hypers[hour], config, &mut fit_failures);
            let query = Query {
                gpr: Some(&ctx.panels),
                svr: Some(&ctx.panels),
                lear: Some(&ctx.panels),
                day: ctx.target,
                date,
                lead_hour: hour,
            };
            let mut cell = predict_cell(&ctx, hour, &models, &query, config, true);
            for (m, reason) in fit_failures {
                cell.failures.push(Failure { date, hour, model: m.name().into(), reason });
            }
            (models, cell)
        })
        .collect();

    if second_day {
        let cells: Vec<&CellOut> = stage.iter().map(|(_, c)| c).collect();
        let own = |slot| with_own_forecast(&ctx, &cells, slot);
        let own_panels = [own(0), own(1), own(2)];
        let next = date.succ_opt().unwrap();
        let stage2: Vec<CellOut> = stage
            .par_iter()
            .enumerate()
            .map(|(hour, (models, _))| {
                let query = Query {
                    gpr: own_panels[0].as_ref(),
                    svr: own_panels[1].as_ref(),
                    lear: own_panels[2].as_ref(),
                    day: ctx.target + 1,
                    date: next,
                    lead_hour: hour + HOURS_PER_DAY,
                };
                let mut cell = predict_cell(&ctx, hour, models, &query, config, false);
                for (slot, m) in [(0, ModelTag::Gpr), (1, ModelTag::Svr), (2, ModelTag::Lear)] {
                    let present = [models.gpr.is_some(), models.svr.is_some(), models.lear.is_some()][slot];
                    if present && own_panels[slot].is_none() && config.models.contains(&m) {
                        cell.failures.push(Failure {
                            date: next,
                            hour,
                            model: m.name().into(),
                            reason: "first-day forecast incomplete".into(),
                        });
                    }
                }
                cell
            })
            .collect();
        for (_, cell) in stage.into_iter() {
            records.extend(cell.records);
            failures.extend(cell.failures);
        }
        for cell in stage2 {
            records.extend(cell.records);
            failures.extend(cell.failures);
        }
    } else {
        for (_, cell) in stage {
            records.extend(cell.records);
            failures.extend(cell.failures);
        }
    }
    (records, failures)
}

/// Calibration days of the run and the refit block each belongs to.
fn schedule(first: usize, last: usize, config: &BacktestConfig) -> Vec<(usize, usize)> {
    let step = config.horizon_hours / HOURS_PER_DAY;
    (first..=last).step_by(step).map(|d| (d, (d - first) / config.refit_days)).collect()
}

pub fn run_on_panels(panels: &DayPanels, config: &BacktestConfig) -> Result<BacktestOutput> {
    config.validate()?;
    let first = panels.day_of(config.start).ok_or(BacktestError::OutOfRange(config.start))?;
    let last = panels.day_of(config.end).ok_or(BacktestError::OutOfRange(config.end))?;
    let lead = config.window_days + MAX_LAG;
    if first < lead {
        return Err(BacktestError::InsufficientHistory {
            target: config.start,
            needed: config.start - chrono::Duration::days(lead as i64),
            available: panels.start_date(),
        });
    }
    let need = Need::of(&config.models);
    let plan = schedule(first, last, config);
    let second_day = |d: usize| config.horizon_hours == 48 && d < last;

    with_pool(config, || {
        // one hyperparameter search per (block, hour), at the block's first day
        let mut block_starts: Vec<(usize, usize)> = Vec::new();
        for &(d, b) in &plan {
            if block_starts.last().map(|&(_, pb)| pb) != Some(b) {
                block_starts.push((d, b));
            }
        }
        let tasks: Vec<(usize, usize)> =
            block_starts.iter().flat_map(|&(d, _)| (0..HOURS_PER_DAY).map(move |h| (d, h))).collect();
        let hypers: Vec<Hyper> = tasks
            .par_iter()
            .map(|&(d, hour)| match prepare_day(panels, d, 0, config) {
                Ok(ctx) => search_hyper(&ctx, hour, config, need),
                Err(e) => {
                    Hyper {
                        gpr: need.gpr.then(|| Err(format!("day preparation: {e}"))),
                        svr: need.svr.then(|| Err(format!("day preparation: {e}"))),
                        lear: need.lear.then(|| Err(format!("day preparation: {e}"))),
                    }
                }
            })
            .collect();

        let days: Vec<(Vec<ForecastRecord>, Vec<Failure>)> = plan
            .par_iter()
            .map(|&(d, b)| {
                let hs = &hypers[b * HOURS_PER_DAY..(b + 1) * HOURS_PER_DAY];
                forecast_day(panels, d, second_day(d), hs, config)
            })
            .collect();

        let mut records: Vec<ForecastRecord> = Vec::new();
        let mut failures: Vec<Failure> = Vec::new();
        for (r, f) in days {
            records.extend(r);
            failures.extend(f);
        }
        records.sort_by(|a, b| (a.date, a.hour, &a.model).cmp(&(b.date, b.hour, &b.model)));
        failures.sort_by(|a, b| (a.date, a.hour, &a.model).cmp(&(b.date, b.hour, &b.model)));

        let mut actuals = Vec::new();
        for d in first..=last {
            for hour in 0..HOURS_PER_DAY {
                let price = panels.price.get(d, hour);
                if price.is_finite() {
                    actuals.push(Actual { date: panels.date_of(d), hour, price });
                }
            }
        }
        BacktestOutput { models: config.models.clone(), records, actuals, failures }
    })
}

/// Where artifacts go: `--out` overrides the configured directory.
pub fn output_dir(config: &BacktestConfig, override_dir: Option<PathBuf>) -> PathBuf {
    override_dir.unwrap_or_else(|| config.output_dir.clone())
}
