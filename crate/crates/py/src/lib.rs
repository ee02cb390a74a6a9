//! Python bindings: the GP, SVR and LASSO models, conformal intervals,
//! metrics and the backtest/diagnostic pipelines.

use std::path::PathBuf;

use chrono::NaiveDate;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use kernelcast::backtest::{output_dir, run_backtest};
use kernelcast::config::{parse_models, BacktestConfig};
use kernelcast::conformal::{self, ConformalConfig, TargetStats};
use kernelcast::diagnose::{diagnose_kernels, write_diagnosis};
use kernelcast::gpr::{GprConfig, GprModel};
use kernelcast::kernels::{self, KernelKind, KernelParams};
use kernelcast::lear::{self, LambdaConfig};
use kernelcast::metrics;
use kernelcast::report::{self, emit_report};
use kernelcast::svr::{SvrConfig, SvrKernel, SvrModel};
use kernelcast::synthetic::{self, SyntheticConfig};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn kernel_kind(name: &str) -> PyResult<KernelKind> {
    match name {
        "se" => Ok(KernelKind::SquaredExponential),
        "rq" => Ok(KernelKind::RationalQuadratic),
        "sum" => Ok(KernelKind::Sum),
        other => Err(err(format!("unknown kernel {other:?}, expected se, rq or sum"))),
    }
}

fn parse_date(s: &str) -> PyResult<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(err)
}

/// Composite-kernel hyperparameters (natural scale).
#[pyclass(name = "KernelParams", from_py_object)]
#[derive(Clone)]
struct PyKernelParams {
    inner: KernelParams,
}

#[pymethods]
impl PyKernelParams {
    #[new]
    #[pyo3(signature = (sigma_se=1.0, ell_se=1.0, sigma_rq=1.0, ell_rq=1.0, alpha_rq=1.0, sigma_n=0.1))]
    fn new(sigma_se: f64, ell_se: f64, sigma_rq: f64, ell_rq: f64, alpha_rq: f64, sigma_n: f64) -> PyResult<Self> {
        Ok(Self { inner: KernelParams::new(sigma_se, ell_se, sigma_rq, ell_rq, alpha_rq, sigma_n).map_err(err)? })
    }

    #[getter]
    fn sigma_se(&self) -> f64 {
        self.inner.sigma_se()
    }
    #[getter]
    fn ell_se(&self) -> f64 {
        self.inner.ell_se()
    }
    #[getter]
    fn sigma_rq(&self) -> f64 {
        self.inner.sigma_rq()
    }
    #[getter]
    fn ell_rq(&self) -> f64 {
        self.inner.ell_rq()
    }
    #[getter]
    fn alpha_rq(&self) -> f64 {
        self.inner.alpha_rq()
    }
    #[getter]
    fn sigma_n(&self) -> f64 {
        self.inner.sigma_n()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "KernelParams(sigma_se={}, ell_se={}, sigma_rq={}, ell_rq={}, alpha_rq={}, sigma_n={})",
            p.sigma_se(),
            p.ell_se(),
            p.sigma_rq(),
            p.ell_rq(),
            p.alpha_rq(),
            p.sigma_n()
        )
    }
}

/// Gram matrix of `inputs` as a list of rows.
#[pyfunction]
#[pyo3(signature = (inputs, params, kernel="sum"))]
fn gram(inputs: Vec<Vec<f64>>, params: PyKernelParams, kernel: &str) -> PyResult<Vec<Vec<f64>>> {
    let g = kernels::gram(&inputs, &params.inner, kernel_kind(kernel)?).map_err(err)?;
    Ok(g.values.row_iter().map(|r| r.iter().copied().collect()).collect())
}

/// `(count, fraction)` of min-max scaled Gram entries below `threshold`.
#[pyfunction]
#[pyo3(signature = (inputs, params, kernel="sum", threshold=0.2))]
fn insignificance(inputs: Vec<Vec<f64>>, params: PyKernelParams, kernel: &str, threshold: f64) -> PyResult<(usize, f64)> {
    let g = kernels::gram(&inputs, &params.inner, kernel_kind(kernel)?).map_err(err)?;
    let i = kernels::insignificance_fraction(&g, threshold).map_err(err)?;
    Ok((i.count, i.fraction))
}

#[pyclass(name = "GaussianProcess")]
struct PyGaussianProcess {
    inner: GprModel,
}

#[pymethods]
impl PyGaussianProcess {
    /// Maximum-likelihood fit with random restarts.
    #[staticmethod]
    #[pyo3(signature = (inputs, targets, kernel="sum", restarts=5, max_iter=200, seed=0))]
    fn fit(inputs: Vec<Vec<f64>>, targets: Vec<f64>, kernel: &str, restarts: usize, max_iter: usize, seed: u64) -> PyResult<Self> {
        let cfg = GprConfig { kind: kernel_kind(kernel)?, restarts, max_iter, ..GprConfig::default() };
        Ok(Self { inner: GprModel::fit(&inputs, &targets, &cfg, seed).map_err(err)? })
    }

    /// Conditions on the data with fixed hyperparameters.
    #[staticmethod]
    #[pyo3(signature = (inputs, targets, params, kernel="sum"))]
    fn condition(inputs: Vec<Vec<f64>>, targets: Vec<f64>, params: PyKernelParams, kernel: &str) -> PyResult<Self> {
        Ok(Self { inner: GprModel::condition(&inputs, &targets, params.inner, kernel_kind(kernel)?).map_err(err)? })
    }

    /// `(mean, variance, lower, upper)` per query.
    #[pyo3(signature = (queries, alpha=0.05))]
    fn predict(&self, queries: Vec<Vec<f64>>, alpha: f64) -> PyResult<Vec<(f64, f64, f64, f64)>> {
        let p = self.inner.predict(&queries, alpha).map_err(err)?;
        Ok(p.into_iter().map(|p| (p.mean, p.variance, p.lower, p.upper)).collect())
    }

    fn log_marginal_likelihood(&self) -> PyResult<f64> {
        self.inner.log_marginal_likelihood().map_err(err)
    }

    #[getter]
    fn params(&self) -> PyKernelParams {
        PyKernelParams { inner: self.inner.params }
    }
}

fn svr_kernel(name: &str) -> PyResult<SvrKernel> {
    SvrKernel::parse(name).ok_or_else(|| err(format!("unknown SVR kernel {name:?}")))
}

#[pyclass(name = "SupportVectorRegressor")]
struct PySvr {
    inner: SvrModel,
}

#[pymethods]
impl PySvr {
    #[staticmethod]
    #[pyo3(signature = (inputs, targets, c=1.0, epsilon=0.01, kernel="squared_exponential", gamma=None, coef0=0.0, degree=2))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        inputs: Vec<Vec<f64>>,
        targets: Vec<f64>,
        c: f64,
        epsilon: f64,
        kernel: &str,
        gamma: Option<f64>,
        coef0: f64,
        degree: u32,
    ) -> PyResult<Self> {
        let cfg = SvrConfig { c, epsilon, kernel: svr_kernel(kernel)?, gamma, coef0, degree, ..SvrConfig::default() };
        Ok(Self { inner: SvrModel::solve_dual(&inputs, &targets, &cfg).map_err(err)? })
    }

    fn predict(&self, queries: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        self.inner.predict(&queries).map_err(err)
    }

    #[getter]
    fn dual_coefs(&self) -> Vec<f64> {
        self.inner.dual_coefs.clone()
    }
    #[getter]
    fn bias(&self) -> f64 {
        self.inner.bias
    }
    #[getter]
    fn dual_objective(&self) -> f64 {
        self.inner.dual_objective
    }
    #[getter]
    fn kkt_violation(&self) -> f64 {
        self.inner.kkt_violation
    }
}

/// LASSO by coordinate descent: `(theta, intercept)`.
#[pyfunction]
#[pyo3(signature = (rows, targets, lam, tol=1e-7, max_iter=10_000))]
fn lasso(rows: Vec<Vec<f64>>, targets: Vec<f64>, lam: f64, tol: f64, max_iter: usize) -> PyResult<(Vec<f64>, f64)> {
    let f = lear::coordinate_descent(&rows, &targets, lam, tol, max_iter).map_err(err)?;
    Ok((f.theta, f.intercept))
}

/// Holdout selection on the default log grid; returns the chosen lambda.
#[pyfunction]
#[pyo3(signature = (rows, targets, holdout=28, grid_size=50))]
fn select_lambda(rows: Vec<Vec<f64>>, targets: Vec<f64>, holdout: usize, grid_size: usize) -> PyResult<f64> {
    let cfg = LambdaConfig { holdout, grid_size, ..LambdaConfig::default() };
    Ok(lear::select_lambda(&rows, &targets, None, &cfg).map_err(err)?.lambda)
}

/// Bootstrap conformal interval around `point` from calibration residuals.
#[pyfunction]
#[pyo3(signature = (point, cal_truth, cal_pred, train_targets, alpha=0.05, seed=0))]
fn conformal_interval(point: f64, cal_truth: Vec<f64>, cal_pred: Vec<f64>, train_targets: Vec<f64>, alpha: f64, seed: u64) -> PyResult<(f64, f64)> {
    let scores = conformal::scores(&cal_truth, &cal_pred).map_err(err)?;
    let stats = TargetStats::of(&train_targets);
    let cfg = ConformalConfig { alpha, seed, ..ConformalConfig::default() };
    let mut rng = conformal::stream_rng(seed, 0, 0);
    let iv = conformal::interval_bootstrap(point, &scores, &stats, &cfg, &mut rng).map_err(err)?;
    Ok((iv.lower, iv.upper))
}

/// Per-day error metrics as a dict.
#[pyfunction]
fn daily_metrics(truth: Vec<f64>, predicted: Vec<f64>) -> PyResult<std::collections::BTreeMap<&'static str, f64>> {
    let m = metrics::daily_metrics(&truth, &predicted).map_err(err)?;
    Ok([
        ("rmse", m.rmse),
        ("mae", m.mae),
        ("mape_paper", m.mape_paper),
        ("mape_std", m.mape_std),
        ("smape_paper", m.smape_paper),
        ("smape_std", m.smape_std),
    ]
    .into_iter()
    .collect())
}

/// `(statistic, p_value)` of the Diebold-Mariano test.
#[pyfunction]
fn dm_test(loss_a: Vec<f64>, loss_b: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = metrics::dm_test(&loss_a, &loss_b).map_err(err)?;
    Ok((r.statistic, r.p_value))
}

/// `(statistic, p_value, mean_ranks, nemenyi)` over `blocks[b][model]`.
#[pyfunction]
fn friedman_nemenyi(blocks: Vec<Vec<f64>>) -> PyResult<(f64, f64, Vec<f64>, Vec<Vec<f64>>)> {
    let r = metrics::friedman_nemenyi(&blocks).map_err(err)?;
    Ok((r.statistic, r.p_value, r.mean_ranks, r.nemenyi))
}

/// Writes a synthetic hourly market CSV.
#[pyfunction]
#[pyo3(signature = (path, start="2021-01-01", days=730, seed=0))]
fn generate_synthetic(path: PathBuf, start: &str, days: usize, seed: u64) -> PyResult<()> {
    let recs = synthetic::generate(&SyntheticConfig::new(parse_date(start)?, days, seed));
    let f = std::fs::File::create(&path).map_err(err)?;
    synthetic::write_csv(&recs, std::io::BufWriter::new(f)).map_err(err)
}

/// Runs a configured backtest, writes every artifact and returns the
/// metrics as a JSON string.
#[pyfunction]
#[pyo3(signature = (config, models=None, seed=None, out=None, refit_daily=false))]
fn backtest(py: Python<'_>, config: PathBuf, models: Option<&str>, seed: Option<u64>, out: Option<PathBuf>, refit_daily: bool) -> PyResult<String> {
    let mut cfg = BacktestConfig::load(&config).map_err(err)?;
    if let Some(m) = models {
        cfg.models = parse_models(m).map_err(err)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if refit_daily {
        cfg.refit_days = 1;
    }
    let dir = output_dir(&cfg, out);
    let report = py
        .detach(|| -> Result<_, String> {
            let output = run_backtest(&cfg).map_err(|e| e.to_string())?;
            emit_report(&output, &cfg.external, &dir).map_err(|e| e.to_string())
        })
        .map_err(err)?;
    serde_json::to_string(&report.metrics).map_err(err)
}

/// Recomputes metrics and tests from a run directory; returns metrics JSON.
#[pyfunction]
fn report_dir(dir: PathBuf) -> PyResult<String> {
    let r = report::report_from_dir(&dir).map_err(err)?;
    serde_json::to_string(&r.metrics).map_err(err)
}

/// Gram diagnostics for one window; returns `[(kernel, count, fraction)]`.
#[pyfunction]
#[pyo3(signature = (config, out=None))]
fn diagnose(py: Python<'_>, config: PathBuf, out: Option<PathBuf>) -> PyResult<Vec<(String, usize, f64)>> {
    let cfg = BacktestConfig::load(&config).map_err(err)?;
    let d = py.detach(|| diagnose_kernels(&cfg)).map_err(err)?;
    if let Some(dir) = out.or_else(|| cfg.diagnose.output_dir.clone()) {
        write_diagnosis(&d, &dir).map_err(err)?;
    }
    Ok(d.counts.into_iter().map(|c| (c.kernel, c.count, c.fraction)).collect())
}

#[pymodule]
fn pykernelcast(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernelParams>()?;
    m.add_class::<PyGaussianProcess>()?;
    m.add_class::<PySvr>()?;
    m.add_function(wrap_pyfunction!(gram, m)?)?;
    m.add_function(wrap_pyfunction!(insignificance, m)?)?;
    m.add_function(wrap_pyfunction!(lasso, m)?)?;
    m.add_function(wrap_pyfunction!(select_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(conformal_interval, m)?)?;
    m.add_function(wrap_pyfunction!(daily_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(dm_test, m)?)?;
    m.add_function(wrap_pyfunction!(friedman_nemenyi, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(backtest, m)?)?;
    m.add_function(wrap_pyfunction!(report_dir, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    Ok(())
}
