use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use sha2::{Digest, Sha256};
use wra_core::rng::derive_seed;
use wra_harness::plot::{delivery_cdf, rate_trace_series};
use wra_harness::{
    emit_plot, evaluate_policy, read_metrics, replica_seed, run_experiment, HarnessError, PlotKind, PolicySource,
    RunConfig,
};

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("wra-harness-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn config(text: &str, out: &Path) -> RunConfig {
    let mut c = RunConfig::parse(text).unwrap();
    c.out = out.to_path_buf();
    c
}

fn digest(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

const TINY_V2X: &str = r#"
kind = "v2x"
seed = 5
[v2x]
episodes = 3
eval_episodes = 4
baselines = ["random", "always_off"]
[v2x.dqn]
warmup = 50
"#;

#[test]
fn bandit_smoke_run() {
    let out = scratch("bandit");
    let t0 = Instant::now();
    let outcome = run_experiment(&config("kind = \"bandit\"\n", &out)).unwrap();
    assert!(t0.elapsed().as_secs() < 10);
    assert!(!outcome.failed());
    let rows = read_metrics(&std::fs::read_to_string(outcome.metrics_path()).unwrap()).unwrap();
    assert!(rows.iter().any(|r| r.metric == "train/reward"));
    assert_eq!(outcome.mean("eval/greedy_arm"), Some(2.0));
    for f in ["config.toml", "summary.csv", "timing.toml", "replica-0/eval.csv", "replica-0/traces/q_table.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(!out.join("FAILED").exists());
}

#[test]
fn same_config_gives_identical_files() {
    let text = "kind = \"dsa_multi\"\nseed = 11\nreplicas = 2\n[dsa_multi]\nsteps = 400\neval_slots = 200\n";
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    let ra = run_experiment(&config(text, &a)).unwrap();
    let rb = run_experiment(&config(text, &b)).unwrap();
    assert_eq!(ra.run_id, rb.run_id);
    for f in [
        "metrics.csv",
        "summary.csv",
        "replica-0/metrics.csv",
        "replica-1/metrics.csv",
        "replica-1/checkpoints/dqn.mlp",
        "replica-1/traces/multi_user.csv",
    ] {
        assert_eq!(digest(&a.join(f)), digest(&b.join(f)), "{f}");
    }
    assert_ne!(digest(&a.join("replica-0/metrics.csv")), digest(&a.join("replica-1/metrics.csv")));
}

#[test]
fn resolved_config_reproduces_the_run() {
    let a = scratch("resolved-a");
    let ra = run_experiment(&config("kind = \"tabular\"\n[tabular]\nsteps = 20000\n", &a)).unwrap();
    let saved = std::fs::read_to_string(a.join("config.toml")).unwrap();
    let b = scratch("resolved-b");
    let rb = run_experiment(&config(&saved, &b)).unwrap();
    assert_eq!(std::fs::read(a.join("metrics.csv")).unwrap(), std::fs::read(b.join("metrics.csv")).unwrap());
    assert_eq!(ra.summary, rb.summary);
}

#[test]
fn v2x_run_artifacts_and_evaluation() {
    let out = scratch("v2x");
    let cfg = config(TINY_V2X, &out);
    let outcome = run_experiment(&cfg).unwrap();
    assert!(!outcome.failed(), "{:?}", outcome.replicas);
    let rep = out.join("replica-0");
    for k in 0..4 {
        assert!(rep.join(format!("checkpoints/agent-{k}.mlp")).exists());
    }
    let trace = std::fs::read_to_string(rep.join("traces/v2x_trace.csv")).unwrap();
    let series = rate_trace_series(&trace).unwrap();
    assert_eq!(series.len(), 4);
    assert!(series.iter().all(|s| s.points.len() == 100));
    let svg = out.join("fig.svg");
    emit_plot(PlotKind::RateTrace, &[rep.join("traces/v2x_trace.csv")], &svg, None).unwrap();
    assert!(std::fs::read_to_string(&svg).unwrap().contains("V2V link 3"));

    let delivered = outcome.mean("eval/delivery_rate").unwrap();
    let cdf = delivery_cdf(&std::fs::read_to_string(rep.join("traces/delivery_times.csv")).unwrap()).unwrap();
    assert!(cdf.windows(2).all(|w| w[1].1 >= w[0].1));
    assert!((cdf.last().unwrap().1 - delivered).abs() < 1e-12);
    assert_eq!(outcome.mean("eval/always_off/delivery_rate"), Some(0.0));
    assert!(rep.join("traces/v2x_trace_random.csv").exists());

    let eval_seed = derive_seed(replica_seed(cfg.seed, 0), 1);
    let random = evaluate_policy(&cfg, PolicySource::Baseline("random"), eval_seed).unwrap();
    assert_eq!(random.get("delivery_rate"), outcome.mean("eval/random/delivery_rate"));
    let from_disk = evaluate_policy(&cfg, PolicySource::Checkpoints(&rep.join("checkpoints")), eval_seed).unwrap();
    assert_eq!(from_disk.get("delivery_rate"), Some(delivered));
    assert_eq!(from_disk.get("v2i_sum_rate"), outcome.mean("eval/v2i_sum_rate"));
    let again = evaluate_policy(&cfg, PolicySource::Checkpoints(&rep.join("checkpoints")), eval_seed).unwrap();
    assert_eq!(again, from_disk);

    let mut wider = cfg.clone();
    let v = wider.v2x.as_mut().unwrap();
    v.fingerprint = Some(!v.fingerprint.unwrap_or(true));
    match evaluate_policy(&wider, PolicySource::Checkpoints(&rep.join("checkpoints")), eval_seed) {
        Err(HarnessError::Core(e @ wra_core::Error::Compatibility { .. })) => {
            let msg = e.to_string();
            let wra_core::Error::Compatibility { expected, found } = e else { unreachable!() };
            assert_ne!(expected, found);
            assert!(msg.contains(&expected.to_string()) && msg.contains(&found.to_string()), "{msg}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn divergence_leaves_partial_artifacts_and_a_marker() {
    let out = scratch("diverge");
    let text = "kind = \"dsa_multi\"\n[dsa_multi]\nsteps = 300\n[dsa_multi.dqn]\noptimizer = \"sgd\"\nstep_size = 1e300\nwarmup = 32\n";
    let outcome = run_experiment(&config(text, &out)).unwrap();
    assert!(outcome.failed());
    assert!(out.join("FAILED").exists());
    assert!(out.join("replica-0/FAILED").exists());
    assert!(read_metrics(&std::fs::read_to_string(out.join("metrics.csv")).unwrap()).is_ok());

    let out = scratch("diverge-power");
    let text = "kind = \"power\"\n[power]\nepisodes = 4\nslots_per_episode = 50\nbaselines = false\n[power.dqn]\noptimizer = \"sgd\"\nstep_size = 1e300\nwarmup = 16\n";
    let outcome = run_experiment(&config(text, &out)).unwrap();
    assert!(outcome.failed());
    let reason = std::fs::read_to_string(out.join("replica-0/FAILED")).unwrap();
    assert!(reason.contains("NaN"), "{reason}");
    assert!(read_metrics(&std::fs::read_to_string(out.join("metrics.csv")).unwrap()).is_ok());
}

#[test]
fn cli_reports_config_line_and_exit_code() {
    let dir = scratch("cli");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "kind = \"bandit\"\n\n[bandit]\nsteps = 10\nbogus = 1\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_wra"))
        .args(["train", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml:5:"), "{err}");

    let good = dir.join("good.toml");
    std::fs::write(&good, "kind = \"bandit\"\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_wra"))
        .args(["train", "--replicas", "0", "--config"])
        .arg(&good)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("replicas"));

    let run_dir = dir.join("run");
    let o = Command::new(env!("CARGO_BIN_EXE_wra"))
        .args(["train", "--seed", "3", "--replicas", "2", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(&run_dir)
        .env("WRA_LOG", "off")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(run_dir.join("replica-1/metrics.csv").exists());
    let plot = dir.join("curve.svg");
    let o = Command::new(env!("CARGO_BIN_EXE_wra"))
        .args(["plot", "--kind", "learning_curve", "--input"])
        .arg(run_dir.join("metrics.csv"))
        .arg("--out")
        .arg(&plot)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(std::fs::read_to_string(&plot).unwrap().contains("replica 1"));

    let o = Command::new(env!("CARGO_BIN_EXE_wra"))
        .args(["oracle", "--seed", "1", "--out"])
        .arg(dir.join("oracle"))
        .env("WRA_LOG", "off")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(std::fs::read_to_string(dir.join("oracle/oracle.csv")).unwrap().starts_with("instance_id,method,objective"));
}
