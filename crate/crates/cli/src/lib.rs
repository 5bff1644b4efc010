//! Configuration, execution and result emission for the `qpart` binary.

pub mod config;
pub mod error;
pub mod run;

pub use config::{load_config, parse_config, preset, Experiment, ExperimentConfig, PRESETS};
pub use error::CliError;
pub use run::{run_experiment, RunOutput};
