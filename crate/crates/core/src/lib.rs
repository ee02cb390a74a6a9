pub mod backtest;
pub mod config;
pub mod conformal;
pub mod dataset;
pub mod diagnose;
pub mod gpr;
pub mod hybrid;
pub mod kernels;
pub mod lear;
pub mod metrics;
pub mod optim;
pub mod report;
pub mod svr;
pub mod synthetic;
