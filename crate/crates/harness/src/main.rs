use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wra_core::rng::derive_seed;
use wra_harness::config::OracleSection;
use wra_harness::{
    emit_plot, evaluate_policy, replica_seed, run_experiment, run_oracle, HarnessError, Kind, PlotKind,
    PolicySource, RunConfig,
};

/// Train, evaluate and plot wireless resource-allocation experiments.
/// Log verbosity comes from `WRA_LOG` (default `info`).
#[derive(Parser)]
#[command(name = "wra", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every replica of a run.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Evaluate saved checkpoints or a baseline policy.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Directory with the `.mlp` files of one replica.
        #[arg(long, conflicts_with = "baseline")]
        checkpoints: Option<PathBuf>,
        /// Baseline name, e.g. `random`.
        #[arg(long)]
        baseline: Option<String>,
        /// Master seed; defaults to the config's.
        #[arg(long)]
        seed: Option<u64>,
        /// Replica whose evaluation seed to use.
        #[arg(long, default_value_t = 0)]
        replica: usize,
        /// Episodes, slots or instances, depending on the kind.
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render an SVG figure from traces or metrics.
    Plot {
        /// rate_trace, learning_curve or cdf.
        #[arg(long)]
        kind: PlotKind,
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Metric for learning curves (default train/reward).
        #[arg(long)]
        metric: Option<String>,
    },
    /// Run WMMSE, FP and brute force on random instances.
    Oracle {
        /// A config of kind "oracle"; defaults apply without one.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &PathBuf, seed: Option<u64>, out: Option<PathBuf>, replicas: Option<usize>) -> Result<RunConfig, HarnessError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out = o;
    }
    if let Some(r) = replicas {
        cfg.replicas = r;
    }
    cfg.validate().map_err(|(section, key, msg)| HarnessError::Config {
        line: 0,
        col: 0,
        msg: if section.is_empty() { format!("{key}: {msg}") } else { format!("[{section}] {key}: {msg}") },
    })?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            replicas,
        } => {
            let cfg = load(&config, seed, out, replicas)?;
            let outcome = run_experiment(&cfg)?;
            for s in &outcome.summary {
                println!("{} = {} (std {}, n {})", s.metric, s.mean, s.std, s.n);
            }
            Ok(!outcome.failed())
        }
        Command::Eval {
            config,
            checkpoints,
            baseline,
            seed,
            replica,
            episodes,
            out,
        } => {
            let mut cfg = load(&config, seed, None, None)?;
            if let Some(n) = episodes {
                cfg.set_eval_length(n);
            }
            let source = match (&checkpoints, &baseline) {
                (Some(dir), _) => PolicySource::Checkpoints(dir),
                (None, Some(b)) => PolicySource::Baseline(b),
                (None, None) => return Err(HarnessError::Invalid("pass --checkpoints or --baseline".into())),
            };
            let report = evaluate_policy(&cfg, source, derive_seed(replica_seed(cfg.seed, replica), 1))?;
            report.write(&out)?;
            for (name, value) in &report.metrics {
                println!("{name} = {value}");
            }
            Ok(true)
        }
        Command::Plot {
            kind,
            inputs,
            out,
            metric,
        } => {
            if let Some(p) = emit_plot(kind, &inputs, &out, metric.as_deref())? {
                println!("{}", p.display());
            }
            Ok(true)
        }
        Command::Oracle { config, seed, out } => {
            let (section, cfg_seed) = match config {
                Some(path) => {
                    let cfg = RunConfig::load(&path)?;
                    if cfg.kind != Kind::Oracle {
                        return Err(HarnessError::Invalid(format!("{} is not an oracle config", path.display())));
                    }
                    (cfg.resolved().oracle.unwrap_or_default(), cfg.seed)
                }
                None => (OracleSection::default(), 0),
            };
            let report = run_oracle(&section, seed.unwrap_or(cfg_seed))?;
            std::fs::create_dir_all(&out).map_err(|e| HarnessError::Invalid(format!("{}: {e}", out.display())))?;
            std::fs::write(out.join("oracle.csv"), &report.csv)
                .map_err(|e| HarnessError::Invalid(format!("{}: {e}", out.display())))?;
            for (name, value) in &report.stats {
                println!("{name} = {value}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WRA_LOG", "info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: at least one replica failed; see FAILED in the output directory");
            ExitCode::from(1)
        }
        Err(e @ (HarnessError::Config { .. } | HarnessError::ConfigFile { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
