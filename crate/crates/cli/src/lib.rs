//! Config parsing and the experiment runner behind the `fedweight` binary.

pub mod config;
pub mod run;

pub use config::{parse_config, parse_config_str, ConfigError, ExperimentConfig};
pub use run::{apply_overrides, plan, run, CliError, Overrides};
