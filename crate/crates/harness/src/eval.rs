//! Evaluation from saved checkpoints or of a named baseline.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::RunConfig;
use crate::kinds::{self, Actor};
use crate::{write_file, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    /// Summary metrics in the order they were produced.
    pub metrics: Vec<(String, f64)>,
    /// File name and contents of per-step traces.
    pub traces: Vec<(String, String)>,
}

impl EvalReport {
    pub fn push(&mut self, name: &str, value: f64) {
        self.metrics.push((name.to_string(), value));
    }

    pub fn trace(&mut self, name: &str, text: String) {
        self.traces.push((name.to_string(), text));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// `metric,value` table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (n, v) in &self.metrics {
            let _ = writeln!(out, "{n},{v}");
        }
        out
    }

    /// Write `eval.csv` and every trace into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join("eval.csv"), self.to_csv())?;
        for (name, text) in &self.traces {
            write_file(&dir.join(name), text)?;
        }
        Ok(())
    }
}

pub enum PolicySource<'a> {
    /// Directory holding the `.mlp` files written by a run.
    Checkpoints(&'a Path),
    /// Baseline by name, e.g. `random` for V2X or `full_power` for power control.
    Baseline(&'a str),
}

/// Greedy evaluation with the episode counts of `cfg`. Checkpoints must fit
/// the environment; a width mismatch is reported with both widths.
///
/// A run evaluates replica `r` with `derive_seed(replica_seed(seed, r), 1)`;
/// passing the same value here reproduces its numbers.
pub fn evaluate_policy(cfg: &RunConfig, source: PolicySource<'_>, seed: u64) -> Result<EvalReport> {
    let cfg = cfg.resolved();
    match source {
        PolicySource::Checkpoints(dir) => {
            let nets = kinds::load_nets(&cfg, dir)?;
            kinds::evaluate(&cfg, Actor::Nets(&nets), seed)
        }
        PolicySource::Baseline(name) => kinds::evaluate(&cfg, Actor::Baseline(name), seed),
    }
}
