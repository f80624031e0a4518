//! Files, configuration and the parallel Monte Carlo harness around
//! [`quantid_core`].
//!
//! * [`config`]: TOML experiment configuration and the two desk presets.
//! * [`dataset_io`]: the replayable dataset text format.
//! * [`bench`]: data generation, estimator dispatch and `run_experiment`.
//! * [`report`]: FIT CSV, five-number summaries and the SVG box plot.
//! * [`trace`]: column dumps of EM traces and Gibbs chains.

use std::path::PathBuf;

pub mod bench;
pub mod config;
pub mod dataset_io;
pub mod report;
pub mod trace;

pub use bench::{run_experiment, FitReport, FitRow};
pub use config::{EstimatorKind, ExperimentConfig, QuantizerSpec};

/// Problems with user-supplied configuration or input files.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid TOML: {0}")]
    Toml(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
}
