//! Experiment runner: configuration parsing and dispatch to the lrex modules.

pub mod config;
pub mod run;

pub use config::{parse_config, parse_config_for, ConfigError, ExperimentConfig, Mode};
pub use run::{run, RunError};
