use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};

use kernelcast::backtest::{output_dir, run_backtest};
use kernelcast::config::{parse_models, BacktestConfig};
use kernelcast::diagnose::{diagnose_kernels, write_diagnosis};
use kernelcast::report::{emit_report, report_from_dir, Report};
use kernelcast::synthetic::{generate, write_csv, SyntheticConfig};

#[derive(Parser)]
#[command(name = "kernelcast", version, about = "Day-ahead electricity price forecasting backtests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a rolling-window backtest and write predictions, metrics, tests and plots.
    Backtest {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated subset of gpr,svr,hybrid,lear.
        #[arg(long)]
        models: Option<String>,
        /// Re-run the hyperparameter search every day instead of every `refit_days`.
        #[arg(long)]
        refit_daily: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export SE, RQ and sum-kernel Gram matrices for one training window.
    DiagnoseKernels {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute metrics, tests and plots from a finished run directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Write a synthetic hourly market CSV.
    GenerateSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "2021-01-01")]
        start: NaiveDate,
        #[arg(long, default_value_t = 730)]
        days: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn summarize(report: &Report) {
    for (model, m) in &report.metrics.models {
        let picp = m.picp.map_or("-".to_string(), |p| format!("{p:.3}"));
        eprintln!("{model:<8} days {:>4}  mae {:>8.3}  rmse {:>8.3}  picp {picp}", m.days, m.mae, m.rmse);
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Backtest { config, models, refit_daily, seed, out } => {
            let mut cfg = BacktestConfig::load(&config)?;
            if let Some(m) = models {
                cfg.models = parse_models(&m)?;
            }
            if refit_daily {
                cfg.refit_days = 1;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = output_dir(&cfg, out);
            let output = run_backtest(&cfg)?;
            for f in &output.failures {
                eprintln!("warning: {} h{:02} {}: {}", f.date, f.hour, f.model, f.reason);
            }
            let report = emit_report(&output, &cfg.external, &dir)?;
            summarize(&report);
            eprintln!("wrote {}", dir.display());
        }
        Command::DiagnoseKernels { config, out } => {
            let cfg = BacktestConfig::load(&config)?;
            let dir = out
                .or_else(|| cfg.diagnose.output_dir.clone())
                .unwrap_or_else(|| cfg.output_dir.join("diagnostics"));
            let d = diagnose_kernels(&cfg)?;
            write_diagnosis(&d, &dir)?;
            for c in &d.counts {
                println!("{:<4} {:>8} of {} below {}", c.kernel, c.count, d.n * d.n, d.threshold);
            }
        }
        Command::Report { input } => summarize(&report_from_dir(&input)?),
        Command::GenerateSynthetic { out, start, days, seed } => {
            let recs = generate(&SyntheticConfig::new(start, days, seed));
            write_csv(&recs, BufWriter::new(File::create(&out)?))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
