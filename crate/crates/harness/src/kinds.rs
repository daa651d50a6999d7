//! Train and evaluate phases of every experiment kind.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use wra_core::channel::{GilbertElliott, RotatingChannel, SpectrumDynamics};
use wra_core::env::dsa::{
    coexist_history, evaluate_coexist, evaluate_multi_user, evaluate_single_user, single_user_history,
    joint_channel_mdp, tdma_oracle_rate, train_coexist, train_multi_user, train_single_user, CoexistPeers,
    HistoryEncoder, SingleUserPolicy,
};
use wra_core::env::power::{evaluate_power_policy, train_power_dqn, PowerPolicy, N_POWER_ACTIONS};
use wra_core::env::v2x::{evaluate_v2x, v2x_train, V2xAgents, V2xPolicy};
use wra_core::learn_opt::{
    eval_lsap, eval_power_model, gen_lsap_dataset, gen_power_dataset, train_lsap_classifiers, train_supervised,
    train_unsupervised_power, LsapModels,
};
use wra_core::nn::{Activation, Hidden, MlpParams, OutputHead};
use wra_core::opt::value_iteration;
use wra_core::rl::{epsilon_greedy, q_learning, q_update, DqnLearner, QTable, TrainingLog};
use wra_core::rng::{derive_seed, seeded};

use crate::config::{DsaWorld, Kind, RunConfig, V2xBaseline, V2xMode};
use crate::eval::EvalReport;
use crate::metrics::MetricsWriter;
use crate::oracle::run_oracle;
use crate::{HarnessError, Result};

/// Output of a training phase: named networks plus rows already written.
pub(crate) struct Trained {
    pub nets: Vec<(String, MlpParams)>,
    /// Extra files for the replica directory.
    pub traces: Vec<(String, String)>,
    /// Metrics that are complete without an evaluation phase.
    pub report: Option<EvalReport>,
}

impl Trained {
    fn nets(nets: Vec<(String, MlpParams)>) -> Self {
        Self {
            nets,
            traces: Vec::new(),
            report: None,
        }
    }
}

/// What acts during evaluation.
pub(crate) enum Actor<'a> {
    Nets(&'a [MlpParams]),
    Baseline(&'a str),
}

fn section<T: Clone>(s: &Option<T>) -> T {
    s.clone().expect("config is resolved before use")
}

fn log_rows(metrics: &mut MetricsWriter, log: &TrainingLog) -> Result<()> {
    let mut episode = None;
    for r in &log.rows {
        if episode.is_some_and(|e| e != r.episode) {
            metrics.end_episode()?;
        }
        episode = Some(r.episode);
        metrics.push("train/reward", r.step, r.reward)?;
        metrics.push("train/epsilon", r.step, r.epsilon)?;
        metrics.push("train/mean_q", r.step, r.mean_q)?;
        if let Some(loss) = r.loss {
            metrics.push("train/loss", r.step, loss)?;
        }
    }
    metrics.end_episode()
}

fn dqn_nets(learner: &DqnLearner) -> Vec<(String, MlpParams)> {
    vec![("dqn".to_string(), learner.online.clone())]
}

fn check_width(net: &MlpParams, input: usize, output: usize) -> Result<()> {
    if net.input_width() != input {
        return Err(wra_core::Error::Compatibility {
            expected: net.input_width(),
            found: input,
        }
        .into());
    }
    if net.output_width() != output {
        return Err(wra_core::Error::Compatibility {
            expected: net.output_width(),
            found: output,
        }
        .into());
    }
    Ok(())
}

/// Checkpoint names and output head of each kind's networks.
pub(crate) fn checkpoint_layout(cfg: &RunConfig) -> Result<(Vec<String>, Activation)> {
    let one = |name: &str| vec![name.to_string()];
    Ok(match cfg.kind {
        Kind::DsaSingle | Kind::DsaCoexist | Kind::DsaMulti | Kind::Power => (one("dqn"), Activation::relu()),
        Kind::V2x => {
            let v = section(&cfg.v2x);
            let count = match v.mode {
                V2xMode::MarlFingerprint => v.k_v2v,
                V2xMode::SingleAgentTurnTaking => 1,
            };
            ((0..count).map(|k| format!("agent-{k}")).collect(), Activation::relu())
        }
        Kind::Supervised | Kind::Unsupervised => (
            one("model"),
            Activation::new(Hidden::Relu, OutputHead::Sigmoid { scale: 1.0 }),
        ),
        Kind::Lsap => {
            let n = section(&cfg.lsap).n;
            ((0..n).map(|j| format!("job-{j}")).collect(), Activation::new(Hidden::Relu, OutputHead::Softmax))
        }
        Kind::Bandit | Kind::Tabular | Kind::Oracle => {
            return Err(HarnessError::Invalid(format!(
                "kind {} has no network checkpoints",
                cfg.kind.name()
            )))
        }
    })
}

pub(crate) fn load_nets(cfg: &RunConfig, dir: &Path) -> Result<Vec<MlpParams>> {
    let (names, act) = checkpoint_layout(cfg)?;
    names
        .iter()
        .map(|n| MlpParams::load(&dir.join(format!("{n}.mlp")), act).map_err(Into::into))
        .collect()
}

enum World {
    Rotating(RotatingChannel),
    Markov(GilbertElliott),
}

fn dsa_world(s: &crate::config::DsaSingleSection, seed: u64) -> Result<World> {
    Ok(match s.world {
        DsaWorld::Rotating => World::Rotating(RotatingChannel::new(s.channels, 0)?),
        DsaWorld::GilbertElliott => {
            World::Markov(GilbertElliott::uniform(s.channels, s.p_gg, s.p_bb, &mut seeded(seed))?)
        }
    })
}

fn reference(w: &World) -> SingleUserPolicy<'_> {
    match w {
        World::Rotating(_) => SingleUserPolicy::FollowRotation,
        World::Markov(ch) => SingleUserPolicy::Myopic(ch),
    }
}

fn eval_world<D: SpectrumDynamics + Clone>(world: &D, policy: &SingleUserPolicy<'_>, slots: usize, seed: u64) -> Result<f64> {
    Ok(evaluate_single_user(&mut world.clone(), policy, slots, seed)?)
}

fn eval_dsa_single(cfg: &RunConfig, actor: Actor<'_>, seed: u64) -> Result<EvalReport> {
    let s = section(&cfg.dsa_single);
    let world = dsa_world(&s, derive_seed(seed, 0))?;
    let slots = s.eval_slots;
    let run = |p: &SingleUserPolicy<'_>| match &world {
        World::Rotating(w) => eval_world(w, p, slots, seed),
        World::Markov(w) => eval_world(w, p, slots, seed),
    };
    let mut report = EvalReport::default();
    match actor {
        Actor::Nets(nets) => {
            let width = single_user_history(s.history, s.channels)?.width();
            check_width(&nets[0], width, s.channels)?;
            let learner = DqnLearner::from_params(nets[0].clone(), s.train().dqn)?;
            let dqn = run(&SingleUserPolicy::Dqn(&learner, s.history))?;
            let reference = run(&reference(&world))?;
            let random = run(&SingleUserPolicy::Random)?;
            report.push("success", dqn);
            report.push("reference_success", reference);
            report.push("random_success", random);
            report.push("ratio", dqn / reference);
        }
        Actor::Baseline("random") => report.push("success", run(&SingleUserPolicy::Random)?),
        Actor::Baseline("reference") => report.push("success", run(&reference(&world))?),
        Actor::Baseline(b) => return Err(unknown_baseline(cfg, b)),
    }
    Ok(report)
}

fn unknown_baseline(cfg: &RunConfig, b: &str) -> HarnessError {
    HarnessError::Invalid(format!("kind {} has no baseline {b:?}", cfg.kind.name()))
}

fn peers(s: &crate::config::DsaCoexistSection) -> Result<CoexistPeers> {
    Ok(CoexistPeers::new(s.tdma_frame.clone(), s.aloha_p)?)
}

fn eval_dsa_coexist(cfg: &RunConfig, actor: Actor<'_>, seed: u64) -> Result<EvalReport> {
    let s = section(&cfg.dsa_coexist);
    let Actor::Nets(nets) = actor else {
        return Err(HarnessError::Invalid("dsa_coexist evaluates checkpoints only".into()));
    };
    check_width(&nets[0], coexist_history(s.history)?.width(), 2)?;
    let learner = DqnLearner::from_params(nets[0].clone(), s.train().dqn)?;
    let rate = evaluate_coexist(&learner, &mut peers(&s)?, s.history, s.eval_slots, seed)?;
    let oracle = tdma_oracle_rate(&s.tdma_frame);
    let mut report = EvalReport::default();
    report.push("throughput", rate);
    report.push("oracle_rate", oracle);
    report.push("ratio", rate / oracle);
    Ok(report)
}

fn eval_dsa_multi(cfg: &RunConfig, actor: Actor<'_>, seed: u64) -> Result<EvalReport> {
    let s = section(&cfg.dsa_multi);
    let Actor::Nets(nets) = actor else {
        return Err(HarnessError::Invalid("dsa_multi evaluates checkpoints only".into()));
    };
    let mu = s.multi_user();
    let n = mu.capacities.len();
    check_width(&nets[0], HistoryEncoder::new(mu.history, n + 1, 1)?.width(), n + 1)?;
    let learner = DqnLearner::from_params(nets[0].clone(), mu.dqn.clone())?;
    let summary = evaluate_multi_user(&learner, &mu, s.eval_slots, seed)?;
    let mut report = EvalReport::default();
    report.push("utilization", summary.utilization);
    report.push("log_utility", summary.log_utility);
    for (u, v) in summary.per_user_success.iter().enumerate() {
        report.push(&format!("user{u}_success"), *v);
    }
    report.trace("multi_user.csv", summary.csv);
    Ok(report)
}

fn eval_power(cfg: &RunConfig, actor: Actor<'_>, seed: u64) -> Result<EvalReport> {
    let s = section(&cfg.power);
    let env = s.env();
    let learner;
    let policy = match actor {
        Actor::Nets(nets) => {
            check_width(&nets[0], env.observation_width(), N_POWER_ACTIONS)?;
            learner = DqnLearner::from_params(nets[0].clone(), s.train().dqn)?;
            PowerPolicy::Dqn(&learner)
        }
        Actor::Baseline("full_power") => PowerPolicy::FullPower,
        Actor::Baseline("random") => PowerPolicy::Random,
        Actor::Baseline("wmmse") => PowerPolicy::Wmmse,
        Actor::Baseline(b) => return Err(unknown_baseline(cfg, b)),
    };
    let summary = evaluate_power_policy(&env, &policy, s.eval_episodes, s.eval_slots, seed)?;
    let mut report = EvalReport::default();
    report.push("sum_rate", summary.mean_sum_rate);
    report.push("wmmse_sum_rate", summary.mean_wmmse_rate);
    report.push("ratio", summary.ratio);
    report.trace("power_trace.csv", summary.trace_csv);
    Ok(report)
}

fn delivery_csv(times: &[Option<usize>], k: usize) -> String {
    let mut out = String::from("episode,link,delivery_slot\n");
    for (i, t) in times.iter().enumerate() {
        let slot = t.map(|s| s.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{slot}", i / k.max(1), i % k.max(1));
    }
    out
}

fn eval_v2x(cfg: &RunConfig, actor: Actor<'_>, seed: u64) -> Result<EvalReport> {
    let s = section(&cfg.v2x);
    let env = s.env();
    let agents;
    let policy = match actor {
        Actor::Nets(nets) => {
            agents = V2xAgents {
                mode: s.train_mode(),
                fingerprint: s.train().uses_fingerprint(),
                networks: nets.to_vec(),
            };
            agents.check(&env)?;
            V2xPolicy::Agents(&agents)
        }
        Actor::Baseline(b) => match b {
            "random" => V2xPolicy::Random,
            "always_off" => V2xPolicy::AlwaysOff,
            "best_rb_full_power" => V2xPolicy::BestRbFullPower,
            "orthogonal_full_power" => V2xPolicy::OrthogonalFullPower,
            "random_rb_full_power" => V2xPolicy::RandomRbFullPower,
            _ => return Err(unknown_baseline(cfg, b)),
        },
    };
    let summary = evaluate_v2x(&env, &policy, s.eval_episodes, seed)?;
    let mut report = EvalReport::default();
    report.push("delivery_rate", summary.delivery_rate);
    report.push("v2i_sum_rate", summary.mean_v2i_sum_rate);
    report.push("v2v_sum_rate", summary.mean_v2v_sum_rate);
    report.trace("v2x_trace.csv", summary.trace_csv);
    report.trace("delivery_times.csv", delivery_csv(&summary.delivery_times, env.k()));
    Ok(report)
}

fn eval_model(cfg: &RunConfig, actor: Actor<'_>, seed: u64) -> Result<EvalReport> {
    let (problem, count) = match cfg.kind {
        Kind::Supervised => {
            let s = section(&cfg.supervised);
            (s.problem(), s.eval_instances)
        }
        _ => {
            let s = section(&cfg.unsupervised);
            (s.problem(), s.eval_instances)
        }
    };
    let Actor::Nets(nets) = actor else {
        return Err(HarnessError::Invalid(format!("{} evaluates checkpoints only", cfg.kind.name())));
    };
    check_width(&nets[0], problem.input_width(), problem.n_links)?;
    let e = eval_power_model(&nets[0], &problem, &problem.sample_many(count, seed)?)?;
    let mut report = EvalReport::default();
    report.push("model_sum_rate", e.mean_model_rate);
    report.push("wmmse_sum_rate", e.mean_wmmse_rate);
    report.push("ratio", e.ratio);
    report.push("mean_instance_ratio", e.mean_instance_ratio);
    Ok(report)
}

fn eval_lsap_kind(cfg: &RunConfig, actor: Actor<'_>, seed: u64) -> Result<EvalReport> {
    let s = section(&cfg.lsap);
    let Actor::Nets(nets) = actor else {
        return Err(HarnessError::Invalid("lsap evaluates checkpoints only".into()));
    };
    for net in nets {
        check_width(net, s.n * s.n, s.n)?;
    }
    let models = LsapModels {
        n: s.n,
        models: nets.to_vec(),
    };
    let e = eval_lsap(&models, s.eval_instances, seed)?;
    let mut report = EvalReport::default();
    report.push("job_accuracy", e.job_accuracy);
    report.push("perm_accuracy", e.perm_accuracy);
    report.push("cost_ratio", e.cost_ratio);
    Ok(report)
}

/// Evaluation phase. Metric names carry no prefix.
pub(crate) fn evaluate(cfg: &RunConfig, actor: Actor<'_>, seed: u64) -> Result<EvalReport> {
    match cfg.kind {
        Kind::DsaSingle => eval_dsa_single(cfg, actor, seed),
        Kind::DsaCoexist => eval_dsa_coexist(cfg, actor, seed),
        Kind::DsaMulti => eval_dsa_multi(cfg, actor, seed),
        Kind::Power => eval_power(cfg, actor, seed),
        Kind::V2x => eval_v2x(cfg, actor, seed),
        Kind::Supervised | Kind::Unsupervised => eval_model(cfg, actor, seed),
        Kind::Lsap => eval_lsap_kind(cfg, actor, seed),
        Kind::Bandit | Kind::Tabular | Kind::Oracle => Err(HarnessError::Invalid(format!(
            "kind {} is evaluated during its run only",
            cfg.kind.name()
        ))),
    }
}

/// Baselines evaluated next to the trained policy.
pub(crate) fn baselines(cfg: &RunConfig) -> Vec<String> {
    match cfg.kind {
        Kind::Power if section(&cfg.power).baselines => vec!["full_power".into(), "random".into()],
        Kind::V2x => section(&cfg.v2x).baselines.iter().map(|b: &V2xBaseline| b.name().to_string()).collect(),
        _ => Vec::new(),
    }
}

fn train_bandit(cfg: &RunConfig, seed: u64, metrics: &mut MetricsWriter) -> Result<Trained> {
    let s = section(&cfg.bandit);
    let n = s.arms.len();
    let mut q = QTable::new(1, n)?;
    let mut pulls = vec![0u64; n];
    let mut rng = seeded(seed);
    let mut window = 0.0;
    for t in 1..=s.steps {
        let a = epsilon_greedy(q.row(0), s.epsilon, &mut rng);
        let r = f64::from(u8::from(rng.random_bool(s.arms[a])));
        pulls[a] += 1;
        q_update(&mut q, 0, a, r, None, 1.0 / pulls[a] as f64, 0.0)?;
        window += r;
        if t % s.log_every == 0 || t == s.steps {
            let len = (t - 1) % s.log_every + 1;
            metrics.push("train/reward", t, window / len as f64)?;
            metrics.end_episode()?;
            window = 0.0;
        }
    }
    let greedy = wra_core::rl::argmax(q.row(0));
    let best = s.arms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut eval_rng = seeded(derive_seed(seed, 1));
    let wins = (0..s.eval_steps).filter(|_| eval_rng.random_bool(s.arms[greedy])).count();
    let mut report = EvalReport::default();
    report.push("greedy_arm", greedy as f64);
    report.push("greedy_arm_mean", s.arms[greedy]);
    report.push("regret", best - s.arms[greedy]);
    report.push("mean_reward", wins as f64 / s.eval_steps.max(1) as f64);
    let mut table = String::from("arm,estimate,pulls\n");
    for a in 0..n {
        let _ = writeln!(table, "{a},{},{}", q.get(0, a), pulls[a]);
    }
    Ok(Trained {
        nets: Vec::new(),
        traces: vec![("q_table.csv".into(), table)],
        report: Some(report),
    })
}

fn q_csv(rows: impl Iterator<Item = Vec<f64>>) -> String {
    let mut out = String::from("state,action,value\n");
    for (s, row) in rows.enumerate() {
        for (a, v) in row.iter().enumerate() {
            let _ = writeln!(out, "{s},{a},{v}");
        }
    }
    out
}

fn train_tabular(cfg: &RunConfig, seed: u64) -> Result<Trained> {
    let s = section(&cfg.tabular);
    let mdp = joint_channel_mdp(s.p_gg, s.p_bb)?;
    let reference = value_iteration(&mdp, s.gamma, 1e-12)?;
    let q = q_learning(&mdp, &s.q_learning(), seed)?;
    let mut report = EvalReport::default();
    report.push("sup_error", q.sup_distance(&reference));
    report.push("steps", s.steps as f64);
    Ok(Trained {
        nets: Vec::new(),
        traces: vec![
            ("q_table.csv".into(), q_csv((0..q.n_states()).map(|st| q.row(st).to_vec()))),
            ("value_iteration.csv".into(), q_csv(reference.into_iter())),
        ],
        report: Some(report),
    })
}

/// Training phase. Rows go to `metrics` as they are produced.
pub(crate) fn train(cfg: &RunConfig, seed: u64, metrics: &mut MetricsWriter) -> Result<Trained> {
    match cfg.kind {
        Kind::Bandit => train_bandit(cfg, seed, metrics),
        Kind::Tabular => train_tabular(cfg, seed),
        Kind::DsaSingle => {
            let s = section(&cfg.dsa_single);
            let (learner, log) = match dsa_world(&s, derive_seed(seed, 1))? {
                World::Rotating(mut w) => train_single_user(&mut w, &s.train(), seed)?,
                World::Markov(mut w) => train_single_user(&mut w, &s.train(), seed)?,
            };
            log_rows(metrics, &log)?;
            Ok(with_log(Trained::nets(dqn_nets(&learner)), &log))
        }
        Kind::DsaCoexist => {
            let s = section(&cfg.dsa_coexist);
            let (learner, log) = train_coexist(&mut peers(&s)?, &s.train(), seed)?;
            log_rows(metrics, &log)?;
            Ok(with_log(Trained::nets(dqn_nets(&learner)), &log))
        }
        Kind::DsaMulti => {
            let s = section(&cfg.dsa_multi);
            let (learner, log) = train_multi_user(&s.multi_user(), seed)?;
            log_rows(metrics, &log)?;
            Ok(with_log(Trained::nets(dqn_nets(&learner)), &log))
        }
        Kind::Power => {
            let s = section(&cfg.power);
            let (learner, log) = train_power_dqn(&s.env(), &s.train(), seed)?;
            log_rows(metrics, &log)?;
            Ok(with_log(Trained::nets(dqn_nets(&learner)), &log))
        }
        Kind::V2x => {
            let s = section(&cfg.v2x);
            let (agents, log) = v2x_train(&s.env(), &s.train(), seed)?;
            log_rows(metrics, &log)?;
            let nets = agents
                .networks
                .into_iter()
                .enumerate()
                .map(|(k, n)| (format!("agent-{k}"), n))
                .collect();
            Ok(with_log(Trained::nets(nets), &log))
        }
        Kind::Supervised => {
            let s = section(&cfg.supervised);
            let data = gen_power_dataset(&s.problem(), s.samples, derive_seed(seed, 0))?;
            let model = train_supervised(&data, &s.supervised(), derive_seed(seed, 1))?;
            for (e, mse) in model.train_mse.iter().enumerate() {
                metrics.push("train/mse", e as u64 + 1, *mse)?;
                metrics.end_episode()?;
            }
            if model.n_val > 0 {
                metrics.push("train/val_mse", s.epochs as u64, model.val_mse)?;
                metrics.end_episode()?;
            }
            let mut t = Trained::nets(vec![("model".into(), model.params)]);
            t.traces.push(("dataset.sha256".into(), format!("{}\n", data.hash()?)));
            t.traces.push(("dataset.provenance".into(), provenance_text(&data)));
            Ok(t)
        }
        Kind::Unsupervised => {
            let s = section(&cfg.unsupervised);
            let model = train_unsupervised_power(&s.problem(), &s.unsupervised(), seed)?;
            for (w, chunk) in model.loss_trace.chunks(s.log_every).enumerate() {
                let step = (w * s.log_every + chunk.len()) as u64;
                metrics.push("train/loss", step, chunk.iter().sum::<f64>() / chunk.len() as f64)?;
                metrics.end_episode()?;
            }
            Ok(Trained::nets(vec![("model".into(), model.params)]))
        }
        Kind::Lsap => {
            let s = section(&cfg.lsap);
            let data = gen_lsap_dataset(s.n, s.samples, derive_seed(seed, 0))?;
            let models = train_lsap_classifiers(&data, &s.lsap(), derive_seed(seed, 1))?;
            let nets = models
                .models
                .into_iter()
                .enumerate()
                .map(|(j, m)| (format!("job-{j}"), m))
                .collect();
            let mut t = Trained::nets(nets);
            t.traces.push(("dataset.sha256".into(), format!("{}\n", data.hash()?)));
            t.traces.push(("dataset.provenance".into(), provenance_text(&data)));
            Ok(t)
        }
        Kind::Oracle => {
            let s = section(&cfg.oracle);
            let r = run_oracle(&s, seed)?;
            let mut report = EvalReport::default();
            for (k, v) in &r.stats {
                report.push(k, *v);
            }
            Ok(Trained {
                nets: Vec::new(),
                traces: vec![("oracle.csv".into(), r.csv)],
                report: Some(report),
            })
        }
    }
}

fn provenance_text(data: &wra_core::learn_opt::LabeledDataset) -> String {
    let p = &data.provenance;
    format!("generator={}\nseed={}\nconfig={}\n", p.generator, p.seed, p.config)
}

fn with_log(mut t: Trained, log: &TrainingLog) -> Trained {
    t.traces.push(("training_log.csv".into(), log.to_csv()));
    t
}
