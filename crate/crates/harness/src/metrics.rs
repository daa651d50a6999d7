//! Long-format metrics files: `run_id,replica,metric,step,value`.
//!
//! A [`MetricsWriter`] appends to `metrics.csv.part` and writes each
//! episode's rows with a single `write_all` followed by a flush, so a crash
//! leaves whole episodes only. `finish` renames the file into place.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::{HarnessError, Result};

pub const METRICS_HEADER: &str = "run_id,replica,metric,step,value";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub run_id: String,
    pub replica: usize,
    pub metric: String,
    pub step: u64,
    pub value: f64,
}

impl MetricsRecord {
    pub fn to_line(&self) -> String {
        format!("{},{},{},{},{}", self.run_id, self.replica, self.metric, self.step, self.value)
    }
}

pub struct MetricsWriter {
    run_id: String,
    replica: usize,
    part: PathBuf,
    path: PathBuf,
    file: File,
    pending: String,
    rows: usize,
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.contains([',', '\n', '\r']) {
        return Err(HarnessError::Invalid(format!("invalid metric name {name:?}")));
    }
    Ok(())
}

impl MetricsWriter {
    pub fn create(path: &Path, run_id: &str, replica: usize) -> Result<Self> {
        check_name(run_id)?;
        let part = path.with_extension("csv.part");
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
        let mut file = File::create(&part).map_err(|e| HarnessError::io(&part, e))?;
        writeln!(file, "{METRICS_HEADER}").map_err(|e| HarnessError::io(&part, e))?;
        Ok(Self {
            run_id: run_id.to_string(),
            replica,
            part,
            path: path.to_path_buf(),
            file,
            pending: String::new(),
            rows: 0,
        })
    }

    /// Queue one row. A non-finite value is still recorded, then reported
    /// as divergence.
    pub fn push(&mut self, metric: &str, step: u64, value: f64) -> Result<()> {
        check_name(metric)?;
        let _ = writeln!(self.pending, "{},{},{metric},{step},{value}", self.run_id, self.replica);
        self.rows += 1;
        if value.is_finite() {
            Ok(())
        } else {
            Err(HarnessError::Divergence {
                metric: metric.to_string(),
                step,
            })
        }
    }

    /// Write and flush the rows queued since the last episode boundary.
    pub fn end_episode(&mut self) -> Result<()> {
        if self.pending.is_empty() {
            return Ok(());
        }
        self.file
            .write_all(self.pending.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| HarnessError::io(&self.part, e))?;
        self.pending.clear();
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Flush and move the file to its final name. Used for failed runs too,
    /// so partial results stay readable.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.end_episode()?;
        self.file.sync_all().map_err(|e| HarnessError::io(&self.part, e))?;
        std::fs::rename(&self.part, &self.path).map_err(|e| HarnessError::io(&self.path, e))?;
        Ok(self.path)
    }
}

/// Parse a metrics file written by [`MetricsWriter`].
pub fn read_metrics(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim_end) != Some(METRICS_HEADER) {
        return Err(HarnessError::Invalid(format!("metrics file must start with {METRICS_HEADER:?}")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = || HarnessError::Invalid(format!("metrics line {}: malformed row {l:?}", i + 2));
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            Ok(MetricsRecord {
                run_id: f[0].to_string(),
                replica: f[1].parse().map_err(|_| bad())?,
                metric: f[2].to_string(),
                step: f[3].parse().map_err(|_| bad())?,
                value: f[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
