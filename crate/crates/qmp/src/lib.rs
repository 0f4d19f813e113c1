//! Experiment plumbing around `qmp-core`: strict config files, runs with CSV
//! logs and checkpoints, tabular theory reports and SVG plots.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod plot;
pub mod snapshot;
pub mod theory;

pub use config::{ConfigError, ExperimentFile};
pub use experiment::{evaluate_checkpoint, output_dir, run_seed, RunError, RunSummary, OUTPUT_ROOT_VAR};
