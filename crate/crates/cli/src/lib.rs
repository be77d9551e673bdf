//! Experiment driver for `prodform`: configuration, artifact writers and one
//! module per experiment.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{Experiment, ExperimentConfig};
pub use error::CliError;
pub use experiments::run;
