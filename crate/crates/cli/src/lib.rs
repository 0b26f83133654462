//! Experiment harness for fractional front propagation: configuration
//! parsing, run orchestration, sweeps and report emission.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, ConfigError, ExperimentConfig, Mode};
pub use run::{run_experiment, RunError};
