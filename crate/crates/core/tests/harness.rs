mod common;

use std::collections::BTreeMap;
use std::fs;

use chrono::Duration;
use kernelcast::backtest::{prepare_day, run_on_panels, BacktestError, ForecastRecord};
use kernelcast::config::ModelTag;
use kernelcast::dataset::Variable;
use kernelcast::hybrid::HybridWeights;
use kernelcast::report::{read_predictions, report_from_dir};

use common::*;

fn by_model(records: &[ForecastRecord], model: &str) -> Vec<ForecastRecord> {
    records.iter().filter(|r| r.model == model).cloned().collect()
}

#[test]
fn gpr_only_run_has_one_record_per_hour() {
    let panels = synthetic_panels(60, 1);
    let mut cfg = small_config(&panels, 40, 10);
    cfg.models = vec![ModelTag::Gpr];
    let out = run(&panels, &cfg);
    assert_eq!(out.records.len(), 240);
    assert!(out.records.iter().all(|r| r.model == "gpr" && r.lb.is_some() && r.ub.is_some()));
    assert_eq!(out.actuals.len(), 240);
    let mut sorted = out.records.clone();
    sorted.sort_by(|a, b| (a.date, a.hour, &a.model).cmp(&(b.date, b.hour, &b.model)));
    assert_eq!(sorted, out.records);
}

#[test]
fn serial_and_parallel_runs_write_identical_files() {
    let panels = synthetic_panels(50, 2);
    let mut cfg = small_config(&panels, 40, 3);
    let dir = tempfile::tempdir().unwrap();
    cfg.threads = Some(1);
    emit(&run(&panels, &cfg), &dir.path().join("serial"));
    cfg.threads = Some(4);
    emit(&run(&panels, &cfg), &dir.path().join("parallel"));
    for f in ["predictions.csv", "metrics.json", "tests.json"] {
        assert_eq!(fs::read(dir.path().join("serial").join(f)).unwrap(), fs::read(dir.path().join("parallel").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn hybrid_column_is_mean_of_gpr_and_svr_in_file() {
    let panels = synthetic_panels(50, 3);
    let mut cfg = small_config(&panels, 40, 2);
    cfg.models = vec![ModelTag::Gpr, ModelTag::Svr, ModelTag::Hybrid];
    let dir = tempfile::tempdir().unwrap();
    emit(&run(&panels, &cfg), dir.path());
    let recs = read_predictions(&dir.path().join("predictions.csv")).unwrap();
    let mut cells: BTreeMap<_, BTreeMap<String, f64>> = BTreeMap::new();
    for r in &recs {
        cells.entry((r.date, r.hour)).or_default().insert(r.model.clone(), r.point);
    }
    assert_eq!(cells.len(), 48);
    for m in cells.values() {
        assert!((m["hybrid"] - 0.5 * (m["gpr"] + m["svr"])).abs() <= 1e-12 * m["hybrid"].abs().max(1.0));
    }
}

#[test]
fn lambda_one_hybrid_reproduces_gpr() {
    let panels = synthetic_panels(50, 4);
    let mut cfg = small_config(&panels, 40, 2);
    cfg.models = vec![ModelTag::Gpr, ModelTag::Hybrid];
    cfg.hybrid = HybridWeights::first(1.0).unwrap();
    let out = run(&panels, &cfg);
    let (g, h) = (by_model(&out.records, "gpr"), by_model(&out.records, "hybrid"));
    assert_eq!(g.len(), h.len());
    for (a, b) in g.iter().zip(&h) {
        assert_eq!(a.point.to_bits(), b.point.to_bits());
        assert_eq!(a.point_transformed.map(f64::to_bits), b.point_transformed.map(f64::to_bits));
    }
}

#[test]
fn future_prices_never_reach_the_models() {
    let panels = synthetic_panels(50, 5);
    let mut cfg = small_config(&panels, 40, 1);
    cfg.models = vec![ModelTag::Gpr, ModelTag::Svr, ModelTag::Lear];
    let clean = run(&panels, &cfg);
    let mut poisoned = panels.clone();
    for d in 40..50 {
        poisoned.price.day_mut(d).fill(1e6);
    }
    let dirty = run(&poisoned, &cfg);
    for (a, b) in clean.records.iter().zip(&dirty.records) {
        assert_eq!(a.point.to_bits(), b.point.to_bits(), "{} h{} {}", a.date, a.hour, a.model);
    }
    assert_ne!(clean.actuals, dirty.actuals);
}

#[test]
fn raw_points_invert_the_transformed_outputs() {
    let panels = synthetic_panels(50, 6);
    let mut cfg = small_config(&panels, 40, 2);
    cfg.transform.signed_log = [true; 3];
    cfg.models = vec![ModelTag::Gpr, ModelTag::Svr, ModelTag::Hybrid, ModelTag::Lear];
    let out = run(&panels, &cfg);
    for r in &out.records {
        let day = panels.day_of(r.date).unwrap();
        let spec = prepare_day(&panels, day, 0, &cfg).unwrap().spec;
        let t = r.point_transformed.expect("in-memory records carry the transformed output");
        let raw = spec.inverse(Variable::Price, t).unwrap();
        assert!((raw - r.point).abs() <= 1e-9 * r.point.abs().max(1.0), "{} {raw} {}", r.model, r.point);
    }
}

#[test]
fn two_day_horizon_covers_every_target_date() {
    let panels = synthetic_panels(50, 7);
    let mut cfg = small_config(&panels, 40, 4);
    cfg.horizon_hours = 48;
    cfg.models = vec![ModelTag::Gpr, ModelTag::Lear];
    let out = run(&panels, &cfg);
    assert_eq!(out.records.len(), 4 * 24 * 2);
    for k in 0..4 {
        let d = cfg.start + Duration::days(k);
        assert_eq!(out.records.iter().filter(|r| r.date == d).count(), 48);
    }
    // the second day of each pair differs from a fresh one-day calibration
    let mut daily = cfg.clone();
    daily.horizon_hours = 24;
    let fresh = run(&panels, &daily);
    let second = cfg.start + Duration::days(1);
    let a: Vec<f64> = out.records.iter().filter(|r| r.date == second && r.model == "gpr").map(|r| r.point).collect();
    let b: Vec<f64> = fresh.records.iter().filter(|r| r.date == second && r.model == "gpr").map(|r| r.point).collect();
    assert_ne!(a, b);
}

#[test]
fn external_forecasts_join_the_report() {
    let panels = synthetic_panels(50, 8);
    let mut cfg = small_config(&panels, 40, 2);
    cfg.models = vec![ModelTag::Gpr];
    let out = run(&panels, &cfg);
    let dir = tempfile::tempdir().unwrap();
    let ext = dir.path().join("dnn.csv");
    let mut dnn = String::from("date,hour,model,point,lb,ub,runtime_ms\n");
    for a in &out.actuals {
        dnn.push_str(&format!("{},{},dnn,{},,,\n", a.date, a.hour, a.price + 1.0));
    }
    fs::write(&ext, dnn).unwrap();
    let run_dir = dir.path().join("run");
    let report = kernelcast::report::emit_report(&out, &[ext], &run_dir).unwrap();
    assert!(run_dir.join("external/dnn.csv").is_file());
    let m = &report.metrics.models["dnn"];
    assert!((m.mae - 1.0).abs() < 1e-9 && (m.rmse - 1.0).abs() < 1e-9);
    assert!(report.tests.dm.iter().any(|e| e.model_a == "dnn" || e.model_b == "dnn"));
    let again = report_from_dir(&run_dir).unwrap();
    assert_eq!(again.metrics, report.metrics);
}

#[test]
fn report_recomputes_identical_files() {
    let panels = synthetic_panels(50, 9);
    let mut cfg = small_config(&panels, 40, 2);
    cfg.models = vec![ModelTag::Gpr, ModelTag::Lear];
    let dir = tempfile::tempdir().unwrap();
    emit(&run(&panels, &cfg), dir.path());
    let before = fs::read(dir.path().join("metrics.json")).unwrap();
    let tests_before = fs::read(dir.path().join("tests.json")).unwrap();
    fs::remove_file(dir.path().join("metrics.json")).unwrap();
    report_from_dir(dir.path()).unwrap();
    assert_eq!(fs::read(dir.path().join("metrics.json")).unwrap(), before);
    assert_eq!(fs::read(dir.path().join("tests.json")).unwrap(), tests_before);
    assert!(dir.path().join("plot_winter_gpr.svg").is_file());
}

#[test]
fn short_history_is_an_error() {
    let panels = synthetic_panels(50, 10);
    let mut cfg = small_config(&panels, 40, 2);
    cfg.window_days = 40;
    assert!(matches!(run_on_panels(&panels, &cfg), Err(BacktestError::InsufficientHistory { .. })));
}
