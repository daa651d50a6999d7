//! Replica orchestration and artifact layout.
//!
//! ```text
//! <out>/config.toml          resolved configuration
//! <out>/metrics.csv          all replicas, in replica order
//! <out>/summary.csv          metric,mean,std,ci95,n over successful replicas
//! <out>/timing.toml          wall-clock seconds (the only nondeterministic file)
//! <out>/FAILED               present when a replica failed
//! <out>/replica-<r>/metrics.csv
//! <out>/replica-<r>/checkpoints/<name>.mlp
//! <out>/replica-<r>/traces/*.csv
//! <out>/replica-<r>/eval.csv
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};
use wra_core::rng::derive_seed;

use crate::config::RunConfig;
use crate::eval::EvalReport;
use crate::kinds::{self, Actor};
use crate::metrics::{MetricsWriter, METRICS_HEADER};
use crate::{write_file, HarnessError, Result};

/// Seed of replica `r`; adding replicas never changes existing ones.
pub fn replica_seed(master: u64, replica: usize) -> u64 {
    derive_seed(master, replica as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaOutcome {
    pub replica: usize,
    pub seed: u64,
    /// Final metrics, prefixed `eval/` (baselines `eval/<name>/`).
    pub metrics: Vec<(String, f64)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single replica.
    pub std: f64,
    /// Half-width of the normal 95% interval of the mean.
    pub ci95: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub run_id: String,
    pub replicas: Vec<ReplicaOutcome>,
    pub summary: Vec<SummaryRow>,
}

impl RunOutcome {
    pub fn failed(&self) -> bool {
        self.replicas.iter().any(|r| r.error.is_some())
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.summary.iter().find(|s| s.metric == metric).map(|s| s.mean)
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.dir.join("metrics.csv")
    }
}

/// Run id: kind plus a digest of the resolved config without its output
/// path, so the same experiment written elsewhere keeps its id.
pub fn run_id(cfg: &RunConfig) -> String {
    let mut c = cfg.resolved();
    c.out = PathBuf::new();
    let digest = hex::encode(Sha256::digest(c.to_toml().as_bytes()));
    format!("{}-{}", cfg.kind.name(), &digest[..12])
}

fn baseline_file(name: &str, baseline: &str) -> String {
    match name.rsplit_once('.') {
        Some((stem, ext)) => format!("{stem}_{baseline}.{ext}"),
        None => format!("{name}_{baseline}"),
    }
}

fn replica_body(cfg: &RunConfig, seed: u64, dir: &Path, metrics: &mut MetricsWriter, report: &mut EvalReport) -> Result<()> {
    let trained = kinds::train(cfg, derive_seed(seed, 0), metrics)?;
    for (name, net) in &trained.nets {
        write_file(&dir.join("checkpoints").join(format!("{name}.mlp")), net.to_checkpoint())?;
    }
    for (name, text) in &trained.traces {
        write_file(&dir.join("traces").join(name), text)?;
    }
    let eval_seed = derive_seed(seed, 1);
    let mut own = match trained.report {
        Some(r) => r,
        None => {
            let nets: Vec<_> = trained.nets.into_iter().map(|(_, n)| n).collect();
            kinds::evaluate(cfg, Actor::Nets(&nets), eval_seed)?
        }
    };
    for (name, value) in own.metrics.drain(..) {
        report.push(&format!("eval/{name}"), value);
    }
    report.traces.append(&mut own.traces);
    for b in kinds::baselines(cfg) {
        let r = kinds::evaluate(cfg, Actor::Baseline(&b), eval_seed)?;
        for (name, value) in r.metrics {
            report.push(&format!("eval/{b}/{name}"), value);
        }
        for (name, text) in r.traces {
            report.trace(&baseline_file(&name, &b), text);
        }
    }
    for (name, value) in &report.metrics {
        metrics.push(name, 0, *value)?;
    }
    metrics.end_episode()
}

fn run_replica(cfg: &RunConfig, run_id: &str, replica: usize) -> Result<ReplicaOutcome> {
    let seed = replica_seed(cfg.seed, replica);
    let dir = cfg.out.join(format!("replica-{replica}"));
    let _ = std::fs::remove_file(dir.join("FAILED"));
    let mut metrics = MetricsWriter::create(&dir.join("metrics.csv"), run_id, replica)?;
    let mut report = EvalReport::default();
    let result = replica_body(cfg, seed, &dir, &mut metrics, &mut report);
    metrics.finish()?;
    write_file(&dir.join("eval.csv"), report.to_csv())?;
    for (name, text) in &report.traces {
        write_file(&dir.join("traces").join(name), text)?;
    }
    let error = result.err().map(|e| e.to_string());
    if let Some(e) = &error {
        log::error!("replica {replica} failed: {e}");
        write_file(&dir.join("FAILED"), format!("{e}\n"))?;
    }
    Ok(ReplicaOutcome {
        replica,
        seed,
        metrics: report.metrics,
        error,
    })
}

fn summarize(replicas: &[ReplicaOutcome]) -> Vec<SummaryRow> {
    let ok: Vec<&ReplicaOutcome> = replicas.iter().filter(|r| r.error.is_none()).collect();
    let Some(first) = ok.first() else {
        return Vec::new();
    };
    first
        .metrics
        .iter()
        .map(|(name, _)| {
            let v: Vec<f64> = ok
                .iter()
                .filter_map(|r| r.metrics.iter().find(|(n, _)| n == name).map(|(_, x)| *x))
                .collect();
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                metric: name.clone(),
                mean,
                std,
                ci95: 1.96 * std / (n as f64).sqrt(),
                n,
            }
        })
        .collect()
}

fn merge_metrics(out: &Path, replicas: usize) -> Result<()> {
    let mut merged = format!("{METRICS_HEADER}\n");
    for r in 0..replicas {
        let path = out.join(format!("replica-{r}")).join("metrics.csv");
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        for line in text.lines().skip(1) {
            merged.push_str(line);
            merged.push('\n');
        }
    }
    let part = out.join("metrics.csv.part");
    write_file(&part, merged)?;
    let path = out.join("metrics.csv");
    std::fs::rename(&part, &path).map_err(|e| HarnessError::io(&path, e))
}

/// Validate, train and evaluate every replica, then write the merged
/// artifacts. Replicas run on parallel threads and are merged in replica
/// order once all have finished. A failing replica leaves its partial
/// artifacts and a `FAILED` marker; the outcome reports it.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate().map_err(|(section, key, msg)| HarnessError::Config {
        line: 0,
        col: 0,
        msg: if section.is_empty() { format!("{key}: {msg}") } else { format!("[{section}] {key}: {msg}") },
    })?;
    let cfg = cfg.resolved();
    let out = cfg.out.clone();
    std::fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;
    let _ = std::fs::remove_file(out.join("FAILED"));
    write_file(&out.join("config.toml"), cfg.to_toml())?;
    let id = run_id(&cfg);
    log::info!("run {id}: {} replica(s) into {}", cfg.replicas, out.display());

    let width = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cfg.replicas);
    let mut results: Vec<(ReplicaOutcome, f64)> = Vec::with_capacity(cfg.replicas);
    let all: Vec<usize> = (0..cfg.replicas).collect();
    for batch in all.chunks(width) {
        let done = std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|&r| {
                    let (cfg, id) = (&cfg, &id);
                    scope.spawn(move || {
                        let t0 = Instant::now();
                        run_replica(cfg, id, r).map(|o| (o, t0.elapsed().as_secs_f64()))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(HarnessError::Invalid("replica thread panicked".into()))))
                .collect::<Result<Vec<_>>>()
        })?;
        results.extend(done);
    }

    merge_metrics(&out, cfg.replicas)?;
    let replicas: Vec<ReplicaOutcome> = results.iter().map(|(o, _)| o.clone()).collect();
    let summary = summarize(&replicas);
    let mut table = String::from("metric,mean,std,ci95,n\n");
    for s in &summary {
        let _ = writeln!(table, "{},{},{},{},{}", s.metric, s.mean, s.std, s.ci95, s.n);
    }
    write_file(&out.join("summary.csv"), table)?;
    let mut timing = String::new();
    for (o, secs) in &results {
        let _ = writeln!(timing, "[replica-{}]\nseconds = {secs}\n", o.replica);
    }
    write_file(&out.join("timing.toml"), timing)?;
    let failed: Vec<String> = replicas
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("replica {}: {e}", r.replica)))
        .collect();
    if !failed.is_empty() {
        write_file(&out.join("FAILED"), failed.join("\n") + "\n")?;
    }
    Ok(RunOutcome {
        dir: out,
        run_id: id,
        replicas,
        summary,
    })
}
