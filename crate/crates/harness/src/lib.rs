//! Experiment harness for `wra_core`.
//!
//! A run is described by a TOML [`RunConfig`]. [`run_experiment`] trains and
//! evaluates every replica and writes metrics, checkpoints and traces under
//! the output directory; [`evaluate_policy`] re-runs evaluation from saved
//! checkpoints and [`emit_plot`] turns traces into SVG figures.
//!
//! Replica `r` of a run with master seed `s` uses the seed
//! `derive_seed(s, r)`; inside a replica, training uses
//! `derive_seed(replica_seed, 0)` and evaluation `derive_seed(replica_seed, 1)`.

pub mod config;
pub mod eval;
mod kinds;
pub mod metrics;
pub mod oracle;
pub mod plot;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::{Kind, RunConfig};
pub use eval::{evaluate_policy, EvalReport, PolicySource};
pub use metrics::{read_metrics, MetricsRecord, MetricsWriter, METRICS_HEADER};
pub use oracle::{run_oracle, OracleReport};
pub use plot::{emit_plot, PlotKind};
pub use run::{replica_seed, run_experiment, RunOutcome, SummaryRow};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// Invalid configuration text; `line` is 1-based, 0 when unknown.
    #[error("{}", at_line(*line, *col, msg))]
    Config { line: usize, col: usize, msg: String },
    #[error("{}:{line}:{col}: {msg}", path.display())]
    ConfigFile {
        path: PathBuf,
        line: usize,
        col: usize,
        msg: String,
    },
    #[error(transparent)]
    Core(#[from] wra_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("non-finite {metric} at step {step}")]
    Divergence { metric: String, step: u64 },
}

fn at_line(line: usize, col: usize, msg: &str) -> String {
    if line == 0 {
        format!("invalid configuration: {msg}")
    } else {
        format!("line {line}, column {col}: {msg}")
    }
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}
