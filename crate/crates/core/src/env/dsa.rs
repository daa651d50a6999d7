//! Dynamic spectrum access: single-user channel selection, the genie-aided
//! myopic baseline, multi-user collision channels and coexistence with
//! TDMA/ALOHA peers.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng;

use crate::channel::{GilbertElliott, SpectrumDynamics};
use crate::opt::TabularMdp;
use crate::rl::{argmax, boltzmann_mixture, epsilon_greedy, DqnConfig, DqnLearner, Experience, ExplorationSchedule, LogRow, TrainingLog};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

/// Transmit on `action`: +1 if it is good this slot, -1 otherwise. The
/// channels then advance one slot. Returns `(reward, observed good)`.
pub fn dsa_step<D: SpectrumDynamics, R: Rng + ?Sized>(channels: &mut D, action: usize, rng: &mut R) -> Result<(f64, bool)> {
    if action >= channels.n_channels() {
        return Err(Error::Index {
            index: action,
            limit: channels.n_channels(),
        });
    }
    let good = channels.is_good(action);
    channels.advance(rng);
    Ok((if good { 1.0 } else { -1.0 }, good))
}

/// Sliding window of the last `m` (action, observation) pairs. Each slot
/// is a one-hot action followed by `obs_width` observation features; empty
/// slots are all zero. The newest pair comes first.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEncoder {
    m: usize,
    n_actions: usize,
    obs_width: usize,
    window: VecDeque<(usize, Vec<f64>)>,
}

impl HistoryEncoder {
    pub fn new(m: usize, n_actions: usize, obs_width: usize) -> Result<Self> {
        if m == 0 || n_actions == 0 {
            return Err(Error::config("history length and action count must be positive"));
        }
        Ok(Self {
            m,
            n_actions,
            obs_width,
            window: VecDeque::with_capacity(m),
        })
    }

    pub fn width(&self) -> usize {
        self.m * (self.n_actions + self.obs_width)
    }

    pub fn push(&mut self, action: usize, obs: Vec<f64>) {
        debug_assert_eq!(obs.len(), self.obs_width);
        if self.window.len() == self.m {
            self.window.pop_back();
        }
        self.window.push_front((action, obs));
    }

    pub fn encode(&self) -> Vec<f64> {
        let slot = self.n_actions + self.obs_width;
        let mut out = vec![0.0; self.width()];
        for (k, (a, obs)) in self.window.iter().enumerate() {
            out[k * slot + a] = 1.0;
            out[k * slot + self.n_actions..(k + 1) * slot].copy_from_slice(obs);
        }
        out
    }

    pub fn clear(&mut self) {
        self.window.clear();
    }
}

/// Single-user history: one-hot channel plus `+1` (good) or `-1` (bad).
pub fn single_user_history(m: usize, n_channels: usize) -> Result<HistoryEncoder> {
    HistoryEncoder::new(m, n_channels, 1)
}

/// One-step Markov filter: the observed channel's belief is set to 1 or 0,
/// then every belief is propagated through its chain.
pub fn belief_update(belief: &mut [f64], action: usize, observed_good: bool, ch: &GilbertElliott) {
    belief[action] = if observed_good { 1.0 } else { 0.0 };
    for (c, b) in belief.iter_mut().enumerate() {
        *b = propagate(*b, ch.p_gg(c), ch.p_bb(c));
    }
}

fn propagate(b: f64, p_gg: f64, p_bb: f64) -> f64 {
    b * p_gg + (1.0 - b) * (1.0 - p_bb)
}

/// Channel with the highest belief, lowest index on ties.
pub fn myopic_action(belief: &[f64]) -> usize {
    argmax(belief)
}

/// Stationary beliefs of a Gilbert-Elliott ensemble.
pub fn stationary_belief(ch: &GilbertElliott) -> Vec<f64> {
    (0..ch.n_channels()).map(|c| ch.stationary_good(c)).collect()
}

/// Fully observed two-channel MDP: the state is the pair of current
/// conditions (bit `c` set when channel `c` is good), the action picks the
/// channel used next slot, and the reward is +1/-1 by that channel's next
/// condition.
pub fn joint_channel_mdp(p_gg: f64, p_bb: f64) -> Result<TabularMdp> {
    let mut mdp = TabularMdp::new(4, 2)?;
    let stay = |good: bool| if good { p_gg } else { p_bb };
    for s in 0..4usize {
        for a in 0..2usize {
            for s2 in 0..4usize {
                let mut prob = 1.0;
                for c in 0..2 {
                    let now = s >> c & 1 == 1;
                    let next = s2 >> c & 1 == 1;
                    prob *= if now == next { stay(now) } else { 1.0 - stay(now) };
                }
                if prob > 0.0 {
                    let reward = if s2 >> a & 1 == 1 { 1.0 } else { -1.0 };
                    mdp.add(s, a, s2, prob, reward)?;
                }
            }
        }
    }
    Ok(mdp)
}

/// Sample one transition of [`joint_channel_mdp`] from a live channel pair.
pub fn joint_state(ch: &GilbertElliott) -> usize {
    (0..ch.n_channels()).filter(|&c| ch.is_good(c)).map(|c| 1 << c).sum()
}

/// Decision state of the two-channel sensing problem with sufficient
/// statistics: the channel used last slot and what it showed, plus the
/// other channel's last observation and how many slots ago it was made.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeliefState {
    pub last: usize,
    pub last_good: bool,
    /// Slots since the other channel was observed, 2..=age_cap.
    pub other_age: usize,
    pub other_good: bool,
}

/// Two identical channels observed one at a time, as a finite MDP over
/// [`BeliefState`]s with ages capped at `age_cap`. Rewards are expected
/// values of the +1/-1 outcome. Also returns the state list and each
/// state's belief pair.
pub fn belief_mdp(p_gg: f64, p_bb: f64, age_cap: usize) -> Result<(TabularMdp, Vec<BeliefState>, Vec<[f64; 2]>)> {
    if age_cap < 2 {
        return Err(Error::config("age cap must be at least 2"));
    }
    let mut states = Vec::new();
    for last in 0..2 {
        for last_good in [false, true] {
            for other_age in 2..=age_cap {
                for other_good in [false, true] {
                    states.push(BeliefState {
                        last,
                        last_good,
                        other_age,
                        other_good,
                    });
                }
            }
        }
    }
    let index = |s: &BeliefState| {
        states
            .iter()
            .position(|t| t == s)
            .expect("state enumerated above")
    };
    let aged = |good: bool, age: usize| {
        let mut b = if good { 1.0 } else { 0.0 };
        for _ in 0..age {
            b = propagate(b, p_gg, p_bb);
        }
        b
    };
    let beliefs: Vec<[f64; 2]> = states
        .iter()
        .map(|s| {
            let mut b = [0.0; 2];
            b[s.last] = aged(s.last_good, 1);
            b[1 - s.last] = aged(s.other_good, s.other_age);
            b
        })
        .collect();
    let mut mdp = TabularMdp::new(states.len(), 2)?;
    for (si, s) in states.iter().enumerate() {
        for a in 0..2 {
            let p_good = beliefs[si][a];
            for good in [true, false] {
                let prob = if good { p_good } else { 1.0 - p_good };
                let next = if a == s.last {
                    BeliefState {
                        last: a,
                        last_good: good,
                        other_age: (s.other_age + 1).min(age_cap),
                        other_good: s.other_good,
                    }
                } else {
                    BeliefState {
                        last: a,
                        last_good: good,
                        other_age: 2,
                        other_good: s.last_good,
                    }
                };
                mdp.add(si, a, index(&next), prob, if good { 1.0 } else { -1.0 })?;
            }
        }
    }
    Ok((mdp, states, beliefs))
}

/// Learner for the single-user task over any spectrum model.
#[derive(Debug, Clone, PartialEq)]
pub struct DsaTrainConfig {
    pub history: usize,
    pub steps: usize,
    pub dqn: DqnConfig,
    pub exploration: ExplorationSchedule,
}

impl Default for DsaTrainConfig {
    fn default() -> Self {
        Self {
            history: 8,
            steps: 20_000,
            dqn: DqnConfig {
                hidden: vec![64],
                gamma: 0.9,
                batch_size: 32,
                replay_capacity: 10_000,
                warmup: 200,
                ..DqnConfig::default()
            },
            exploration: ExplorationSchedule {
                start: 1.0,
                end: 0.01,
                anneal_steps: 10_000,
            },
        }
    }
}

/// Train a DQN on the single-user task; `world` is advanced in place.
pub fn train_single_user<D: SpectrumDynamics>(world: &mut D, cfg: &DsaTrainConfig, seed: u64) -> Result<(DqnLearner, TrainingLog)> {
    let n = world.n_channels();
    let mut hist = single_user_history(cfg.history, n)?;
    let mut learner = DqnLearner::new(hist.width(), n, cfg.dqn.clone(), derive_seed(seed, 0))?;
    let mut rng = seeded(derive_seed(seed, 1));
    let mut log = TrainingLog::default();
    let mut state = hist.encode();
    let mut reward_acc = 0.0;
    let mut loss = None;
    let window = 1000;
    for step in 0..cfg.steps as u64 {
        let eps = cfg.exploration.epsilon(step);
        let action = learner.act(&state, eps, &mut rng)?;
        let (reward, good) = dsa_step(world, action, &mut rng)?;
        hist.push(action, vec![if good { 1.0 } else { -1.0 }]);
        let next = hist.encode();
        learner.remember(Experience {
            state: std::mem::replace(&mut state, next.clone()),
            action,
            reward,
            next_state: next,
            terminal: false,
        });
        if let Some(l) = learner.train(&mut rng)? {
            loss = Some(l);
        }
        reward_acc += reward;
        if (step + 1) % window == 0 {
            log.push(LogRow {
                step: step + 1,
                episode: step / window,
                epsilon: eps,
                loss,
                mean_q: mean(&learner.q_values(&state)?),
                reward: reward_acc / window as f64,
            });
            reward_acc = 0.0;
        }
    }
    Ok((learner, log))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// How the single user picks a channel during evaluation.
pub enum SingleUserPolicy<'a> {
    Dqn(&'a DqnLearner, usize),
    Random,
    /// Move to the next channel after a success and skip one after a
    /// failure; optimal for the rotating world after at most `N` slots.
    FollowRotation,
    Myopic(&'a GilbertElliott),
}

/// Fraction of successful slots over `slots` steps of `world`.
pub fn evaluate_single_user<D: SpectrumDynamics>(world: &mut D, policy: &SingleUserPolicy<'_>, slots: usize, seed: u64) -> Result<f64> {
    let n = world.n_channels();
    let mut rng = seeded(seed);
    let mut hist = single_user_history(match policy {
        SingleUserPolicy::Dqn(_, m) => *m,
        _ => 1,
    }, n)?;
    let mut belief = match policy {
        SingleUserPolicy::Myopic(ch) => stationary_belief(ch),
        _ => vec![0.0; n],
    };
    let mut last = (0usize, false);
    let mut successes = 0usize;
    for _ in 0..slots {
        let action = match policy {
            SingleUserPolicy::Dqn(learner, _) => learner.act(&hist.encode(), 0.0, &mut rng)?,
            SingleUserPolicy::Random => rng.random_range(0..n),
            SingleUserPolicy::FollowRotation => (last.0 + if last.1 { 1 } else { 2 }) % n,
            SingleUserPolicy::Myopic(_) => myopic_action(&belief),
        };
        let (_, good) = dsa_step(world, action, &mut rng)?;
        hist.push(action, vec![if good { 1.0 } else { -1.0 }]);
        if let SingleUserPolicy::Myopic(ch) = policy {
            belief_update(&mut belief, action, good, ch);
        }
        last = (action, good);
        successes += good as usize;
    }
    Ok(successes as f64 / slots.max(1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Utility {
    /// Sum of delivered rates.
    SumRate,
    /// Sum over users of `log2(1 + rate)`.
    LogRate,
}

/// Collision channel: a user is acknowledged iff it is the only one on its
/// channel. `None` means idle. Returns `(ack, rate)` per user.
pub fn dsa_multi_step(actions: &[Option<usize>], capacities: &[f64]) -> Result<Vec<(bool, f64)>> {
    let n = capacities.len();
    let mut load = vec![0usize; n];
    for a in actions.iter().flatten() {
        if *a >= n {
            return Err(Error::Index { index: *a, limit: n });
        }
        load[*a] += 1;
    }
    Ok(actions
        .iter()
        .map(|a| match a {
            Some(c) if load[*c] == 1 => (true, capacities[*c]),
            _ => (false, 0.0),
        })
        .collect())
}

pub fn utility(rates: &[f64], kind: Utility) -> f64 {
    match kind {
        Utility::SumRate => rates.iter().sum(),
        Utility::LogRate => rates.iter().map(|r| r.ln_1p() / std::f64::consts::LN_2).sum(),
    }
}

/// Best long-run utilization over all pairs of deterministic per-user
/// policies that map the last (action, ack) to the next action, for two
/// users on `n_channels` unit channels. Utilization is averaged over slots
/// `horizon / 2..horizon` of a deterministic run from empty histories.
pub fn exhaustive_two_user_utilization(n_channels: usize, horizon: usize) -> Result<f64> {
    let n_act = n_channels + 1; // last index = idle
    let n_hist = 1 + n_act * 2; // empty + (action, ack)
    let n_policies = (n_act as u64)
        .checked_pow(n_hist as u32)
        .filter(|&p| p * p <= 1 << 26)
        .ok_or_else(|| Error::Size("policy space too large".into()))? as usize;
    let decode = |mut code: usize| -> Vec<usize> {
        (0..n_hist)
            .map(|_| {
                let a = code % n_act;
                code /= n_act;
                a
            })
            .collect()
    };
    let caps = vec![1.0; n_channels];
    let policies: Vec<Vec<usize>> = (0..n_policies).map(decode).collect();
    let mut best = 0.0f64;
    for p1 in &policies {
        for p2 in &policies {
            let mut h = [0usize; 2];
            let mut acks = 0usize;
            for t in 0..horizon {
                let acts = [p1[h[0]], p2[h[1]]];
                let choice: Vec<Option<usize>> = acts.iter().map(|&a| (a < n_channels).then_some(a)).collect();
                let out = dsa_multi_step(&choice, &caps)?;
                for u in 0..2 {
                    h[u] = 1 + acts[u] * 2 + out[u].0 as usize;
                    if t >= horizon / 2 {
                        acks += out[u].0 as usize;
                    }
                }
            }
            let slots = (horizon - horizon / 2) as f64;
            best = best.max(acks as f64 / (slots * n_channels as f64));
            if best >= 1.0 {
                return Ok(best);
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiUserConfig {
    pub users: usize,
    pub capacities: Vec<f64>,
    pub utility: Utility,
    pub history: usize,
    pub steps: usize,
    /// Mixture weight and inverse temperature of the Boltzmann policy.
    pub alpha: f64,
    pub beta: f64,
    /// Mixture weight used at execution time.
    pub exec_alpha: f64,
    /// Train online from the latest transitions instead of a replay memory.
    pub replay_off: bool,
    /// Give every user the network utility instead of its own rate.
    pub shared_reward: bool,
    pub dqn: DqnConfig,
}

impl Default for MultiUserConfig {
    fn default() -> Self {
        Self {
            users: 2,
            capacities: vec![1.0, 1.0],
            utility: Utility::SumRate,
            history: 1,
            steps: 5000,
            alpha: 0.05,
            beta: 20.0,
            exec_alpha: 0.0,
            replay_off: false,
            shared_reward: false,
            dqn: DqnConfig {
                hidden: vec![32],
                gamma: 0.9,
                batch_size: 32,
                replay_capacity: 2000,
                warmup: 100,
                ..DqnConfig::default()
            },
        }
    }
}

/// Per-user history: one-hot over channels plus idle, then the ack bit.
fn multi_history(cfg: &MultiUserConfig) -> Result<HistoryEncoder> {
    HistoryEncoder::new(cfg.history, cfg.capacities.len() + 1, 1)
}

fn as_choice(a: usize, n: usize) -> Option<usize> {
    (a < n).then_some(a)
}

/// Shared-network training: every user acts through the Boltzmann mixture
/// on its own history. Each user learns from its own rate unless
/// `shared_reward` is set; the log records the network utility.
pub fn train_multi_user(cfg: &MultiUserConfig, seed: u64) -> Result<(DqnLearner, TrainingLog)> {
    let n = cfg.capacities.len();
    if cfg.users == 0 || n == 0 {
        return Err(Error::config("need at least one user and one channel"));
    }
    let mut dqn = cfg.dqn.clone();
    if cfg.replay_off {
        dqn.replay_capacity = cfg.users;
        dqn.batch_size = cfg.users;
        dqn.warmup = cfg.users;
    }
    let proto = multi_history(cfg)?;
    let mut learner = DqnLearner::new(proto.width(), n + 1, dqn, derive_seed(seed, 0))?;
    let mut rng = seeded(derive_seed(seed, 1));
    let mut hists = vec![proto; cfg.users];
    let mut log = TrainingLog::default();
    let mut acc = 0.0;
    let mut loss = None;
    let window = 500u64;
    for step in 0..cfg.steps as u64 {
        let states: Vec<Vec<f64>> = hists.iter().map(HistoryEncoder::encode).collect();
        let actions = states
            .iter()
            .map(|s| boltzmann_mixture(&learner.q_values(s)?, cfg.alpha, cfg.beta, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let choices: Vec<Option<usize>> = actions.iter().map(|&a| as_choice(a, n)).collect();
        let out = dsa_multi_step(&choices, &cfg.capacities)?;
        let rates: Vec<f64> = out.iter().map(|o| o.1).collect();
        let total = utility(&rates, cfg.utility);
        for (u, (&a, o)) in actions.iter().zip(&out).enumerate() {
            hists[u].push(a, vec![o.0 as u8 as f64]);
            let reward = if cfg.shared_reward {
                total
            } else {
                utility(&[o.1], cfg.utility)
            };
            learner.remember(Experience {
                state: states[u].clone(),
                action: a,
                reward,
                next_state: hists[u].encode(),
                terminal: false,
            });
        }
        if let Some(l) = learner.train(&mut rng)? {
            loss = Some(l);
        }
        acc += total;
        if (step + 1) % window == 0 {
            log.push(LogRow {
                step: step + 1,
                episode: step / window,
                epsilon: cfg.alpha,
                loss,
                mean_q: mean(&learner.q_values(&hists[0].encode())?),
                reward: acc / window as f64,
            });
            acc = 0.0;
        }
    }
    Ok((learner, log))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiUserSummary {
    /// Acknowledged transmissions per channel per slot.
    pub utilization: f64,
    pub per_user_success: Vec<f64>,
    /// Sum over users of `ln(mean rate)`, with a floor of 1e-9 per user.
    pub log_utility: f64,
    /// CSV `episode,user,success_rate,utilization,log_utility`.
    pub csv: String,
}

/// Distributed execution: every user samples its action from the shared
/// network through the same Boltzmann mixture used in training, which is
/// what lets identical users break symmetry.
pub fn evaluate_multi_user(learner: &DqnLearner, cfg: &MultiUserConfig, slots: usize, seed: u64) -> Result<MultiUserSummary> {
    let n = cfg.capacities.len();
    let mut rng = seeded(seed);
    let mut hists = vec![multi_history(cfg)?; cfg.users];
    let mut acks = vec![0usize; cfg.users];
    let mut rate_sum = vec![0.0; cfg.users];
    for _ in 0..slots {
        let actions = hists
            .iter()
            .map(|h| boltzmann_mixture(&learner.q_values(&h.encode())?, cfg.exec_alpha, cfg.beta, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let choices: Vec<Option<usize>> = actions.iter().map(|&a| as_choice(a, n)).collect();
        let out = dsa_multi_step(&choices, &cfg.capacities)?;
        for (u, o) in out.iter().enumerate() {
            hists[u].push(actions[u], vec![o.0 as u8 as f64]);
            acks[u] += o.0 as usize;
            rate_sum[u] += o.1;
        }
    }
    let slots_f = slots.max(1) as f64;
    let utilization = acks.iter().sum::<usize>() as f64 / (slots_f * n as f64);
    let log_utility = rate_sum.iter().map(|r| (r / slots_f).max(1e-9).ln()).sum();
    let per_user_success: Vec<f64> = acks.iter().map(|&a| a as f64 / slots_f).collect();
    let mut csv = String::from("episode,user,success_rate,utilization,log_utility\n");
    for (u, s) in per_user_success.iter().enumerate() {
        let _ = writeln!(csv, "0,{u},{s},{utilization},{log_utility}");
    }
    Ok(MultiUserSummary {
        utilization,
        per_user_success,
        log_utility,
        csv,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoexistObservation {
    Success,
    Collision,
    Idleness,
}

impl CoexistObservation {
    fn one_hot(self) -> Vec<f64> {
        match self {
            CoexistObservation::Success => vec![1.0, 0.0, 0.0],
            CoexistObservation::Collision => vec![0.0, 1.0, 0.0],
            CoexistObservation::Idleness => vec![0.0, 0.0, 1.0],
        }
    }
}

pub const WAIT: usize = 0;
pub const TRANSMIT: usize = 1;

/// Legacy devices sharing the channel: a TDMA node owning some slots of a
/// repeating frame and an ALOHA node transmitting with fixed probability.
#[derive(Debug, Clone, PartialEq)]
pub struct CoexistPeers {
    pub tdma_frame: Vec<bool>,
    pub aloha_p: f64,
    slot: usize,
}

impl CoexistPeers {
    pub fn new(tdma_frame: Vec<bool>, aloha_p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&aloha_p) {
            return Err(Error::config("ALOHA probability outside [0, 1]"));
        }
        Ok(Self {
            tdma_frame,
            aloha_p,
            slot: 0,
        })
    }

    pub fn slot(&self) -> usize {
        self.slot
    }
}

/// One slot. The agent sees SUCCESS iff it transmits alone and COLLISION
/// if it transmits with anyone else. While waiting it senses COLLISION
/// when a peer occupies the channel and IDLENESS otherwise. Reward is 1
/// only on SUCCESS.
pub fn coexist_step<R: Rng + ?Sized>(peers: &mut CoexistPeers, action: usize, rng: &mut R) -> Result<(CoexistObservation, f64)> {
    if action > TRANSMIT {
        return Err(Error::Index { index: action, limit: 2 });
    }
    let tdma = !peers.tdma_frame.is_empty() && peers.tdma_frame[peers.slot % peers.tdma_frame.len()];
    let aloha = peers.aloha_p > 0.0 && rng.random::<f64>() < peers.aloha_p;
    peers.slot += 1;
    let busy = tdma || aloha;
    let obs = match (action == TRANSMIT, busy) {
        (true, false) => CoexistObservation::Success,
        (true, true) | (false, true) => CoexistObservation::Collision,
        (false, false) => CoexistObservation::Idleness,
    };
    let reward = if obs == CoexistObservation::Success { 1.0 } else { 0.0 };
    Ok((obs, reward))
}

pub fn coexist_history(m: usize) -> Result<HistoryEncoder> {
    HistoryEncoder::new(m, 2, 3)
}

/// Train the coexisting agent; returns the learner and its log.
pub fn train_coexist(peers: &mut CoexistPeers, cfg: &DsaTrainConfig, seed: u64) -> Result<(DqnLearner, TrainingLog)> {
    let mut hist = coexist_history(cfg.history)?;
    let mut learner = DqnLearner::new(hist.width(), 2, cfg.dqn.clone(), derive_seed(seed, 0))?;
    let mut rng = seeded(derive_seed(seed, 1));
    let mut log = TrainingLog::default();
    let mut state = hist.encode();
    let mut acc = 0.0;
    let mut loss = None;
    let window = 1000;
    for step in 0..cfg.steps as u64 {
        let eps = cfg.exploration.epsilon(step);
        let q = learner.q_values(&state)?;
        let action = epsilon_greedy(&q, eps, &mut rng);
        let (obs, reward) = coexist_step(peers, action, &mut rng)?;
        hist.push(action, obs.one_hot());
        let next = hist.encode();
        learner.remember(Experience {
            state: std::mem::replace(&mut state, next.clone()),
            action,
            reward,
            next_state: next,
            terminal: false,
        });
        if let Some(l) = learner.train(&mut rng)? {
            loss = Some(l);
        }
        acc += reward;
        if (step + 1) % window == 0 {
            log.push(LogRow {
                step: step + 1,
                episode: step / window,
                epsilon: eps,
                loss,
                mean_q: mean(&q),
                reward: acc / window as f64,
            });
            acc = 0.0;
        }
    }
    Ok((learner, log))
}

/// Greedy throughput (successes per slot) of a trained coexisting agent.
pub fn evaluate_coexist(learner: &DqnLearner, peers: &mut CoexistPeers, history: usize, slots: usize, seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let mut hist = coexist_history(history)?;
    let mut total = 0.0;
    for _ in 0..slots {
        let action = learner.act(&hist.encode(), 0.0, &mut rng)?;
        let (obs, reward) = coexist_step(peers, action, &mut rng)?;
        hist.push(action, obs.one_hot());
        total += reward;
    }
    Ok(total / slots.max(1) as f64)
}

/// Throughput of transmitting exactly in the slots the TDMA node leaves
/// free (no ALOHA peer).
pub fn tdma_oracle_rate(frame: &[bool]) -> f64 {
    if frame.is_empty() {
        1.0
    } else {
        frame.iter().filter(|&&busy| !busy).count() as f64 / frame.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelCondition, RotatingChannel};
    use crate::opt::{evaluate_policy, value_iteration};

    #[test]
    fn frozen_channels_reward() {
        let mut rng = seeded(0);
        let mut good = GilbertElliott::new(vec![1.0; 3], vec![1.0; 3], vec![ChannelCondition::Good; 3]).unwrap();
        let mut bad = GilbertElliott::new(vec![1.0; 3], vec![1.0; 3], vec![ChannelCondition::Bad; 3]).unwrap();
        for a in 0..3 {
            assert_eq!(dsa_step(&mut good, a, &mut rng).unwrap().0, 1.0);
            assert_eq!(dsa_step(&mut bad, a, &mut rng).unwrap().0, -1.0);
        }
        assert!(dsa_step(&mut good, 3, &mut rng).is_err());
    }

    #[test]
    fn rotation_follower_is_perfect() {
        let mut world = RotatingChannel::new(4, 2).unwrap();
        let rate = evaluate_single_user(&mut world, &SingleUserPolicy::FollowRotation, 1000, 1).unwrap();
        assert!(rate > 0.99, "{rate}");
        let mut world = RotatingChannel::new(4, 2).unwrap();
        let random = evaluate_single_user(&mut world, &SingleUserPolicy::Random, 10_000, 1).unwrap();
        assert!((random - 0.25).abs() < 0.03);
    }

    #[test]
    fn history_window_drops_oldest() {
        let mut h = single_user_history(2, 3).unwrap();
        assert_eq!(h.width(), 8);
        h.push(0, vec![1.0]);
        assert_eq!(h.encode(), vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        h.push(2, vec![-1.0]);
        assert_eq!(h.encode(), vec![0.0, 0.0, 1.0, -1.0, 1.0, 0.0, 0.0, 1.0]);
        h.push(1, vec![1.0]);
        assert_eq!(h.encode(), vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, -1.0]);
    }

    #[test]
    fn absorbing_belief() {
        let ch = GilbertElliott::new(vec![1.0, 0.7], vec![0.6, 0.7], vec![ChannelCondition::Good; 2]).unwrap();
        let mut b = vec![0.5, 0.5];
        belief_update(&mut b, 0, true, &ch);
        for _ in 0..20 {
            belief_update(&mut b, 1, false, &ch);
            assert_eq!(b[0], 1.0);
        }
    }

    #[test]
    fn memoryless_belief() {
        let ch = GilbertElliott::new(vec![0.5; 3], vec![0.5; 3], vec![ChannelCondition::Good; 3]).unwrap();
        let mut b = vec![0.1, 0.9, 0.3];
        belief_update(&mut b, 2, true, &ch);
        assert_eq!(b, vec![0.5; 3]);
    }

    #[test]
    fn belief_filter_matches_matrix_power() {
        let (p_gg, p_bb) = (0.83, 0.64);
        let ch = GilbertElliott::new(vec![p_gg; 2], vec![p_bb; 2], vec![ChannelCondition::Good; 2]).unwrap();
        let mut b = vec![0.3, 0.6];
        belief_update(&mut b, 1, true, &ch);
        // Channel 1 observed good, then never observed for `k` more slots.
        let mut m = [[1.0, 0.0], [0.0, 1.0]];
        let t = [[p_gg, 1.0 - p_gg], [1.0 - p_bb, p_bb]];
        m = [
            [m[0][0] * t[0][0] + m[0][1] * t[1][0], m[0][0] * t[0][1] + m[0][1] * t[1][1]],
            [m[1][0] * t[0][0] + m[1][1] * t[1][0], m[1][0] * t[0][1] + m[1][1] * t[1][1]],
        ];
        for k in 0..30 {
            assert!((b[1] - m[0][0]).abs() < 1e-12, "k={k}");
            assert!((0.0..=1.0).contains(&b[0]));
            belief_update(&mut b, 0, k % 2 == 0, &ch);
            m = [
                [m[0][0] * t[0][0] + m[0][1] * t[1][0], m[0][0] * t[0][1] + m[0][1] * t[1][1]],
                [m[1][0] * t[0][0] + m[1][1] * t[1][0], m[1][0] * t[0][1] + m[1][1] * t[1][1]],
            ];
        }
    }

    #[test]
    fn myopic_is_optimal_on_two_positively_correlated_channels() {
        let (mdp, _, beliefs) = belief_mdp(0.9, 0.8, 60).unwrap();
        let gamma = 0.9;
        let q = value_iteration(&mdp, gamma, 1e-10).unwrap();
        let policy: Vec<usize> = beliefs.iter().map(|b| myopic_action(b)).collect();
        let v = evaluate_policy(&mdp, &policy, gamma, 1e-10).unwrap();
        for s in 0..mdp.n_states() {
            let best = q[s][0].max(q[s][1]);
            assert!((best - v[s]).abs() <= 0.01 * best.abs().max(1.0), "state {s}: {best} vs {}", v[s]);
        }
    }

    #[test]
    fn joint_mdp_rows_are_distributions() {
        let mdp = joint_channel_mdp(0.9, 0.7).unwrap();
        mdp.validate().unwrap();
        let ch = GilbertElliott::new(vec![0.9; 2], vec![0.7; 2], vec![ChannelCondition::Bad, ChannelCondition::Good]).unwrap();
        assert_eq!(joint_state(&ch), 2);
    }

    #[test]
    fn collisions() {
        let caps = [1.0, 1.0];
        assert_eq!(dsa_multi_step(&[Some(0), Some(0)], &caps).unwrap(), vec![(false, 0.0), (false, 0.0)]);
        assert_eq!(dsa_multi_step(&[Some(0), Some(1)], &caps).unwrap(), vec![(true, 1.0), (true, 1.0)]);
        assert_eq!(dsa_multi_step(&[None, Some(1)], &caps).unwrap(), vec![(false, 0.0), (true, 1.0)]);
    }

    #[test]
    fn two_user_exhaustive_reaches_full_utilization() {
        assert_eq!(exhaustive_two_user_utilization(2, 8).unwrap(), 1.0);
    }

    #[test]
    fn coexistence_basics() {
        let mut rng = seeded(1);
        let mut alone = CoexistPeers::new(Vec::new(), 0.0).unwrap();
        for _ in 0..10 {
            assert_eq!(coexist_step(&mut alone, TRANSMIT, &mut rng).unwrap().0, CoexistObservation::Success);
        }
        let mut hog = CoexistPeers::new(vec![true], 0.0).unwrap();
        for _ in 0..10 {
            let (obs, r) = coexist_step(&mut hog, TRANSMIT, &mut rng).unwrap();
            assert_eq!((obs, r), (CoexistObservation::Collision, 0.0));
        }
        assert_eq!(tdma_oracle_rate(&[true, true, false, false]), 0.5);
    }

    #[test]
    fn coexist_rewards_are_binary() {
        let mut rng = seeded(2);
        let mut peers = CoexistPeers::new(vec![true, false, true], 0.3).unwrap();
        for t in 0..1000 {
            let (_, r) = coexist_step(&mut peers, t % 2, &mut rng).unwrap();
            assert!(r == 0.0 || r == 1.0);
        }
    }
}
