//! Experiment harness for the fuzzy Q-learning auto-scaler: TOML
//! configuration with environment overrides, on-disk formats for Q-tables,
//! rules, traces and logs, and a parallel strategy x workload grid runner
//! producing comparison tables.

pub mod config;
pub mod formats;
pub mod harness;

pub use config::{ConfigError, ExperimentConfig, StrategyChoice};
pub use harness::{compute_metrics, emit, run_grid, ExperimentReport, HarnessError, RunMetrics};
