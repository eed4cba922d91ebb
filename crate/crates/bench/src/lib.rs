//! Experiment runner on top of `uaskf-core`: JSON configs, the propagation
//! study, the filter benchmark and their report files.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(a > b)` also rejects NaN

pub mod bench;
pub mod config;
pub mod propagate;
pub mod report;

use std::path::PathBuf;

pub use bench::{run_filter_benchmark, BenchmarkOutput, BenchmarkSummary, TrialReport};
pub use config::ExperimentConfig;
pub use propagate::{run_propagation_experiment, PropagationReport};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[source] uaskf_core::Error),
    #[error("{failed} of {total} trials failed (first: {first})")]
    TooManyFailures { failed: usize, total: usize, first: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    /// Process exit code: 1 for configuration and IO problems, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io { .. } => 1,
            RunError::Numerical(_) | RunError::TooManyFailures { .. } => 2,
        }
    }
}

/// Reads a config file and applies a seed override.
pub fn load_config(path: &std::path::Path, seed: Option<u64>) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|source| RunError::Io { path: path.to_path_buf(), source })?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}
