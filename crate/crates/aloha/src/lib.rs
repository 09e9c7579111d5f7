//! Experiment runner, file formats and command line for `aloha-core`.
//!
//! An [`config::ExperimentConfig`] describes one batch of replications;
//! [`experiment::run_experiment`] runs it on a worker pool and writes
//! `samples.csv`, `ccdf.csv`, `fit.json` and `summary.json`.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod presets;

pub use error::{AppError, Result};
