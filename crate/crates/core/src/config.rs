//! `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Relative paths are resolved
//! against the directory of the configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conformal::ConformalConfig;
use crate::dataset::{CsvSchema, TransformSpec, Variable};
use crate::gpr::GprConfig;
use crate::hybrid::HybridWeights;
use crate::kernels::KernelKind;
use crate::lear::LambdaConfig;
use crate::svr::{SvrConfig, SvrGrid, SvrKernel};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Gpr,
    Svr,
    Hybrid,
    Lear,
}

impl ModelTag {
    pub const ALL: [ModelTag; 4] = [ModelTag::Gpr, ModelTag::Svr, ModelTag::Hybrid, ModelTag::Lear];

    pub fn name(self) -> &'static str {
        match self {
            ModelTag::Gpr => "gpr",
            ModelTag::Svr => "svr",
            ModelTag::Hybrid => "hybrid",
            ModelTag::Lear => "lear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s.trim()))
    }
}

/// Parses a comma-separated model list, e.g. `gpr,svr,hybrid`.
pub fn parse_models(s: &str) -> Result<Vec<ModelTag>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let m = ModelTag::parse(part).ok_or_else(|| ConfigError::BadValue {
            key: "models".into(),
            reason: format!("unknown model `{part}`"),
        })?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub path: PathBuf,
    pub impute_max_run: usize,
    pub schema: CsvSchema,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformConfig {
    pub signed_log: [bool; 3],
    pub standardize: bool,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self { signed_log: [true; 3], standardize: true }
    }
}

impl TransformConfig {
    pub fn spec(&self) -> TransformSpec {
        TransformSpec::new(self.signed_log, self.standardize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseConfig {
    /// Day after the diagnosed window; defaults to `backtest.start`.
    pub target: Option<NaiveDate>,
    pub hour: usize,
    pub threshold: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self { target: None, hour: 12, threshold: 0.2, output_dir: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub data: DataConfig,
    pub transform: TransformConfig,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub window_days: usize,
    pub horizon_hours: usize,
    pub models: Vec<ModelTag>,
    /// External forecast files in the predictions schema.
    pub external: Vec<PathBuf>,
    /// Target days between hyperparameter searches.
    pub refit_days: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub output_dir: PathBuf,
    pub record_runtime: bool,
    pub gpr: GprConfig,
    pub svr: SvrConfig,
    /// `None` keeps `svr` fixed instead of searching.
    pub svr_grid: Option<SvrGrid>,
    pub svr_holdout_days: usize,
    pub conformal: ConformalConfig,
    pub hybrid: HybridWeights,
    pub lear: LambdaConfig,
    pub diagnose: DiagnoseConfig,
}

impl BacktestConfig {
    /// A configuration with every default and the given data and range.
    pub fn new(data_path: impl Into<PathBuf>, start: NaiveDate, end: NaiveDate) -> Self {
        Self {
            data: DataConfig { path: data_path.into(), impute_max_run: 3, schema: CsvSchema::default() },
            transform: TransformConfig::default(),
            start,
            end,
            window_days: 365,
            horizon_hours: 24,
            models: vec![ModelTag::Gpr, ModelTag::Svr, ModelTag::Hybrid, ModelTag::Lear],
            external: Vec::new(),
            refit_days: 7,
            seed: 0,
            threads: None,
            output_dir: PathBuf::from("out"),
            record_runtime: false,
            gpr: GprConfig::default(),
            svr: SvrConfig::default(),
            svr_grid: Some(SvrGrid::default()),
            svr_holdout_days: 28,
            conformal: ConformalConfig::default(),
            hybrid: HybridWeights::default(),
            lear: LambdaConfig::default(),
            diagnose: DiagnoseConfig::default(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut kv = parse_pairs(text)?;
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        let data_path = kv.take("data.path")?.ok_or_else(|| ConfigError::Invalid("`data.path` is required".into()))?;
        let start = kv.required_date("backtest.start")?;
        let end = kv.required_date("backtest.end")?;
        let mut cfg = Self::new(resolve(&data_path), start, end);

        if let Some(v) = kv.parse_num("data.impute_max_run")? {
            cfg.data.impute_max_run = v;
        }
        for (key, slot) in [
            ("data.column.timestamp", &mut cfg.data.schema.timestamp),
            ("data.column.price", &mut cfg.data.schema.price),
            ("data.column.residual_load", &mut cfg.data.schema.residual_load),
            ("data.column.renewables", &mut cfg.data.schema.renewables),
        ] {
            if let Some(v) = kv.take(key)? {
                *slot = v;
            }
        }

        if let Some(v) = kv.take("transform.signed_log")? {
            cfg.transform.signed_log = parse_signed_log(&v)?;
        }
        if let Some(v) = kv.parse_bool("transform.standardize")? {
            cfg.transform.standardize = v;
        }

        if let Some(v) = kv.parse_num("backtest.window_days")? {
            cfg.window_days = v;
        }
        if let Some(v) = kv.parse_num("backtest.horizon_hours")? {
            cfg.horizon_hours = v;
        }
        if let Some(v) = kv.take("backtest.models")? {
            cfg.models = parse_models(&v)?;
        }
        if let Some(v) = kv.take("backtest.external")? {
            cfg.external = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(resolve).collect();
        }
        if let Some(v) = kv.parse_num("backtest.refit_days")? {
            cfg.refit_days = v;
        }
        if let Some(v) = kv.parse_num("backtest.seed")? {
            cfg.seed = v;
        }
        if let Some(v) = kv.parse_num("backtest.threads")? {
            cfg.threads = Some(v);
        }
        if let Some(v) = kv.take("backtest.output_dir")? {
            cfg.output_dir = resolve(&v);
        }
        if let Some(v) = kv.parse_bool("backtest.record_runtime")? {
            cfg.record_runtime = v;
        }

        if let Some(v) = kv.take("gpr.kernel")? {
            cfg.gpr.kind = parse_kernel_kind(&v)?;
        }
        if let Some(v) = kv.parse_num("gpr.restarts")? {
            cfg.gpr.restarts = v;
        }
        if let Some(v) = kv.parse_num("gpr.max_iter")? {
            cfg.gpr.max_iter = v;
        }
        if let Some(v) = kv.parse_num("gpr.grad_tol")? {
            cfg.gpr.grad_tol = v;
        }
        if let Some(v) = kv.parse_num("gpr.noise_floor")? {
            cfg.gpr.noise_floor = v;
        }
        if let Some(v) = kv.parse_num("gpr.alpha")? {
            cfg.gpr.alpha = v;
        }

        if let Some(v) = kv.take("svr.kernel")? {
            cfg.svr.kernel = parse_svr_kernel("svr.kernel", &v)?;
        }
        if let Some(v) = kv.parse_num("svr.c")? {
            cfg.svr.c = v;
        }
        if let Some(v) = kv.parse_num("svr.epsilon")? {
            cfg.svr.epsilon = v;
        }
        if let Some(v) = kv.parse_num("svr.gamma")? {
            cfg.svr.gamma = Some(v);
        }
        if let Some(v) = kv.parse_num("svr.coef0")? {
            cfg.svr.coef0 = v;
        }
        if let Some(v) = kv.parse_num("svr.degree")? {
            cfg.svr.degree = v;
        }
        if let Some(v) = kv.parse_num("svr.tol")? {
            cfg.svr.tol = v;
        }
        if let Some(v) = kv.parse_num("svr.max_passes")? {
            cfg.svr.max_passes = v;
        }
        if let Some(v) = kv.parse_num("svr.holdout_days")? {
            cfg.svr_holdout_days = v;
        }
        if let Some(search) = kv.parse_bool("svr.grid")? {
            cfg.svr_grid = search.then(SvrGrid::default);
        }
        if let Some(v) = kv.take("svr.grid.kernels")? {
            let kernels = split_list(&v).map(|s| parse_svr_kernel("svr.grid.kernels", s)).collect::<Result<_>>()?;
            cfg.svr_grid.get_or_insert_with(SvrGrid::default).kernels = kernels;
        }
        for key in ["svr.grid.epsilons", "svr.grid.cs", "svr.grid.coef0s"] {
            if let Some(v) = kv.take(key)? {
                let values = parse_float_list(key, &v)?;
                let grid = cfg.svr_grid.get_or_insert_with(SvrGrid::default);
                match key {
                    "svr.grid.epsilons" => grid.epsilons = values,
                    "svr.grid.cs" => grid.cs = values,
                    _ => grid.coef0s = values,
                }
            }
        }

        if let Some(v) = kv.parse_num("conformal.nu")? {
            cfg.conformal.nu = v;
        }
        if let Some(v) = kv.parse_num("conformal.num_candidates")? {
            cfg.conformal.num_candidates = v;
        }
        if let Some(v) = kv.parse_num("conformal.bootstrap_reps")? {
            cfg.conformal.bootstrap_reps = v;
        }
        if let Some(v) = kv.parse_num("conformal.alpha")? {
            cfg.conformal.alpha = v;
        }
        if let Some(v) = kv.parse_bool("conformal.split")? {
            cfg.conformal.split = v;
        }
        if let Some(v) = kv.parse_num("conformal.calibration_days")? {
            cfg.conformal.calibration_days = v;
        }

        if let Some(v) = kv.parse_num::<f64>("hybrid.lambda1")? {
            cfg.hybrid = HybridWeights::first(v).map_err(|e| ConfigError::BadValue {
                key: "hybrid.lambda1".into(),
                reason: e.to_string(),
            })?;
        }

        if let Some(v) = kv.parse_num("lear.grid_size")? {
            cfg.lear.grid_size = v;
        }
        if let Some(v) = kv.parse_num("lear.decades")? {
            cfg.lear.decades = v;
        }
        if let Some(v) = kv.parse_num("lear.holdout_days")? {
            cfg.lear.holdout = v;
        }
        if let Some(v) = kv.parse_num("lear.tol")? {
            cfg.lear.tol = v;
        }
        if let Some(v) = kv.parse_num("lear.max_iter")? {
            cfg.lear.max_iter = v;
        }

        if let Some(v) = kv.take("diagnose.target")? {
            cfg.diagnose.target = Some(parse_date("diagnose.target", &v)?);
        }
        if let Some(v) = kv.parse_num("diagnose.hour")? {
            cfg.diagnose.hour = v;
        }
        if let Some(v) = kv.parse_num("diagnose.threshold")? {
            cfg.diagnose.threshold = v;
        }
        if let Some(v) = kv.take("diagnose.output_dir")? {
            cfg.diagnose.output_dir = Some(resolve(&v));
        }

        if let Some(key) = kv.0.keys().next() {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_days < 8 {
            return Err(ConfigError::Invalid(format!("window_days must be at least 8, got {}", self.window_days)));
        }
        if self.horizon_hours != 24 && self.horizon_hours != 48 {
            return Err(ConfigError::Invalid(format!("horizon_hours must be 24 or 48, got {}", self.horizon_hours)));
        }
        if self.end < self.start {
            return Err(ConfigError::Invalid(format!("backtest range {}..{} is empty", self.start, self.end)));
        }
        if self.refit_days == 0 {
            return Err(ConfigError::Invalid("refit_days must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(ConfigError::Invalid("threads must be at least 1".into()));
        }
        if self.diagnose.hour >= 24 {
            return Err(ConfigError::Invalid(format!("diagnose.hour must be in [0, 23], got {}", self.diagnose.hour)));
        }
        self.conformal.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Worker count: `threads`, else `KERNELCAST_THREADS`, else all cores.
    /// When both are set the smaller wins.
    pub fn effective_threads(&self) -> Option<usize> {
        let env = std::env::var("KERNELCAST_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
        match (self.threads, env) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

struct Pairs(BTreeMap<String, String>);

fn parse_pairs(text: &str) -> Result<Pairs> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        if map.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(ConfigError::Duplicate { line: i + 1, key: k.to_string() });
        }
    }
    Ok(Pairs(map))
}

impl Pairs {
    fn take(&mut self, key: &str) -> Result<Option<String>> {
        Ok(self.0.remove(key))
    }

    fn parse_num<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.0
            .remove(key)
            .map(|v| v.parse::<T>().map_err(|e| ConfigError::BadValue { key: key.into(), reason: e.to_string() }))
            .transpose()
    }

    fn parse_bool(&mut self, key: &str) -> Result<Option<bool>> {
        self.0.remove(key).map(|v| parse_bool(key, &v)).transpose()
    }

    fn required_date(&mut self, key: &str) -> Result<NaiveDate> {
        let v = self.0.remove(key).ok_or_else(|| ConfigError::Invalid(format!("`{key}` is required")))?;
        parse_date(key, &v)
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(ConfigError::BadValue { key: key.into(), reason: format!("`{v}` is not a boolean") }),
    }
}

fn parse_date(key: &str, v: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(v, "%Y-%m-%d").map_err(|e| ConfigError::BadValue { key: key.into(), reason: e.to_string() })
}

fn parse_float_list(key: &str, v: &str) -> Result<Vec<f64>> {
    split_list(v)
        .map(|s| s.parse::<f64>().map_err(|e| ConfigError::BadValue { key: key.into(), reason: e.to_string() }))
        .collect()
}

/// `true`, `false`, or the list of variables to log-transform.
fn parse_signed_log(v: &str) -> Result<[bool; 3]> {
    if let Ok(all) = parse_bool("transform.signed_log", v) {
        return Ok([all; 3]);
    }
    let mut out = [false; 3];
    for part in split_list(v) {
        let var = match part {
            "price" => Variable::Price,
            "residual_load" | "load" => Variable::ResidualLoad,
            "renewables" => Variable::Renewables,
            _ => {
                return Err(ConfigError::BadValue {
                    key: "transform.signed_log".into(),
                    reason: format!("unknown variable `{part}`"),
                })
            }
        };
        out[Variable::ALL.iter().position(|&x| x == var).unwrap()] = true;
    }
    Ok(out)
}

fn parse_kernel_kind(v: &str) -> Result<KernelKind> {
    match v.to_ascii_lowercase().as_str() {
        "se" | "squared_exponential" => Ok(KernelKind::SquaredExponential),
        "rq" | "rational_quadratic" => Ok(KernelKind::RationalQuadratic),
        "sum" | "se+rq" => Ok(KernelKind::Sum),
        "sum_lp" | "se+rq+lp" => Ok(KernelKind::SumWithLocalPeriodic),
        _ => Err(ConfigError::BadValue { key: "gpr.kernel".into(), reason: format!("unknown kernel `{v}`") }),
    }
}

fn parse_svr_kernel(key: &str, v: &str) -> Result<SvrKernel> {
    SvrKernel::parse(v).ok_or_else(|| ConfigError::BadValue { key: key.into(), reason: format!("unknown kernel `{v}`") })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "data.path = prices.csv\nbacktest.start = 2023-01-01\nbacktest.end = 2023-01-10\n";

    #[test]
    fn defaults_and_relative_paths() {
        let cfg = BacktestConfig::parse(MINIMAL, Path::new("/data/run")).unwrap();
        assert_eq!(cfg.data.path, PathBuf::from("/data/run/prices.csv"));
        assert_eq!(cfg.window_days, 365);
        assert_eq!(cfg.horizon_hours, 24);
        assert_eq!(cfg.refit_days, 7);
        assert_eq!(cfg.models, ModelTag::ALL.to_vec());
        assert_eq!(cfg.data.impute_max_run, 3);
        assert!(cfg.svr_grid.is_some());
    }

    #[test]
    fn overrides() {
        let text = format!(
            "{MINIMAL}# comment\nbacktest.models = svr, gpr  # trailing\nbacktest.horizon_hours = 48\n\
             transform.signed_log = price\nsvr.grid = false\nhybrid.lambda1 = 1\ngpr.kernel = se\n\
             svr.grid.cs = 1, 2\n"
        );
        let cfg = BacktestConfig::parse(&text, Path::new("")).unwrap();
        assert_eq!(cfg.models, vec![ModelTag::Gpr, ModelTag::Svr]);
        assert_eq!(cfg.horizon_hours, 48);
        assert_eq!(cfg.transform.signed_log, [true, false, false]);
        assert_eq!(cfg.hybrid.lambda2, 0.0);
        assert_eq!(cfg.gpr.kind, KernelKind::SquaredExponential);
        assert_eq!(cfg.svr_grid.unwrap().cs, vec![1.0, 2.0]);
    }

    #[test]
    fn rejects_bad_input() {
        let bad = |extra: &str| BacktestConfig::parse(&format!("{MINIMAL}{extra}\n"), Path::new("")).unwrap_err();
        assert!(matches!(bad("nope = 1"), ConfigError::UnknownKey(_)));
        assert!(matches!(bad("backtest.window_days = 7"), ConfigError::Invalid(_)));
        assert!(matches!(bad("backtest.horizon_hours = 36"), ConfigError::Invalid(_)));
        assert!(matches!(bad("backtest.seed = x"), ConfigError::BadValue { .. }));
        assert!(matches!(bad("data.path = y.csv"), ConfigError::Duplicate { .. }));
        assert!(matches!(bad("just text"), ConfigError::Syntax { .. }));
        assert!(matches!(bad("hybrid.lambda1 = 1.5"), ConfigError::BadValue { .. }));
    }
}
