//! Distributed power control over an interference channel. Every
//! transmitter is an agent adjusting its power in dB steps; all agents
//! share the weighted sum rate as reward.

use std::fmt::Write as _;

use rand::Rng;

use crate::channel::{sample_interference_channel, FadingState, GainMatrix, InterferenceGeometry};
use crate::opt::{sum_rate, wmmse_power, LogBase};
use crate::rl::{DqnConfig, DqnLearner, Experience, ExplorationSchedule, LogRow, TrainingLog};
use crate::rng::{derive_seed, seeded, SimRng};
use crate::{Error, Result};

/// Power adjustments in dB; index [`POWER_OFF`] switches the transmitter off.
pub const POWER_DELTAS_DB: [f64; 5] = [0.0, -1.0, 1.0, -3.0, 3.0];
pub const POWER_OFF: usize = 5;
pub const N_POWER_ACTIONS: usize = 6;

/// Scale applied to dB-valued observation features.
const FEATURE_DB_SCALE: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerEnvConfig {
    pub n_links: usize,
    pub geometry: InterferenceGeometry,
    pub p_max: f64,
    /// Smallest nonzero power a delta action can produce.
    pub p_min_on: f64,
    pub noise: f64,
    /// Per-link rate weights; empty means all ones.
    pub weights: Vec<f64>,
    /// Interferers and victims reported in each observation.
    pub neighbors: usize,
    pub log_base: LogBase,
}

impl Default for PowerEnvConfig {
    fn default() -> Self {
        Self {
            n_links: 4,
            geometry: InterferenceGeometry::default(),
            p_max: 1.0,
            p_min_on: 1e-3,
            noise: 1e-7,
            weights: Vec::new(),
            neighbors: 2,
            log_base: LogBase::Two,
        }
    }
}

impl PowerEnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_links == 0 {
            return Err(Error::config("need at least one link"));
        }
        if !(self.p_max > 0.0 && self.p_min_on > 0.0 && self.p_min_on <= self.p_max) {
            return Err(Error::config("need 0 < p_min_on <= p_max"));
        }
        if !(self.noise > 0.0) {
            return Err(Error::config("noise power must be positive"));
        }
        if !self.weights.is_empty() && self.weights.len() != self.n_links {
            return Err(Error::config("one weight per link required"));
        }
        self.geometry.validate()
    }

    pub fn observation_width(&self) -> usize {
        2 + 3 * self.neighbors
    }

    fn link_weights(&self) -> Vec<f64> {
        if self.weights.is_empty() {
            vec![1.0; self.n_links]
        } else {
            self.weights.clone()
        }
    }
}

/// Per-slot diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerStepInfo {
    /// Gains the reward was computed on.
    pub gains: GainMatrix,
    pub powers: Vec<f64>,
    pub sinr: Vec<f64>,
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PowerEnv {
    cfg: PowerEnvConfig,
    weights: Vec<f64>,
    fading: FadingState,
    gains: GainMatrix,
    powers: Vec<f64>,
    slot: u64,
    rng: SimRng,
}

fn db_feature(x: f64) -> f64 {
    10.0 * x.ln_1p() / std::f64::consts::LN_10 / FEATURE_DB_SCALE
}

impl PowerEnv {
    /// Fresh channel drop; every link starts at half the maximum power.
    pub fn reset(cfg: &PowerEnvConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let fading = sample_interference_channel(cfg.n_links, &cfg.geometry, derive_seed(seed, 0))?;
        Ok(Self::from_fading(cfg, fading, seeded(derive_seed(seed, 1))))
    }

    pub fn from_fading(cfg: &PowerEnvConfig, fading: FadingState, rng: SimRng) -> Self {
        Self {
            weights: cfg.link_weights(),
            gains: fading.gains(),
            fading,
            powers: vec![cfg.p_max / 2.0; cfg.n_links],
            slot: 0,
            cfg: cfg.clone(),
            rng,
        }
    }

    pub fn config(&self) -> &PowerEnvConfig {
        &self.cfg
    }

    pub fn gains(&self) -> &GainMatrix {
        &self.gains
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn fading_mut(&mut self) -> &mut FadingState {
        &mut self.fading
    }

    /// Re-read gains after editing the fading state directly.
    pub fn refresh_gains(&mut self) {
        self.gains = self.fading.gains();
    }

    /// Local measurements of link `i` on the current gains with the previous
    /// slot's powers:
    /// `[P_i / P_max, q_i]` then, for each of the `C` strongest interferers
    /// `[gain, power / P_max]`, then for each of the `C` most affected
    /// victims `[gain]`. `q_i` is the direct gain at full power over the
    /// measured interference plus noise. Gains are `10 log10(1 + g P_max /
    /// noise) / 30`. Missing neighbors are zero.
    pub fn observe(&self, i: usize) -> Vec<f64> {
        let n = self.cfg.n_links;
        let c = self.cfg.neighbors;
        let pm = self.cfg.p_max;
        let snr = |g: f64| db_feature(g * pm / self.cfg.noise);
        let mut obs = Vec::with_capacity(self.cfg.observation_width());
        obs.push(self.powers[i] / pm);
        let in_total = self.gains.interference(i, &self.powers, self.cfg.noise);
        obs.push(db_feature(self.gains.direct(i) * pm / in_total));

        let mut interferers: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        interferers.sort_by(|&a, &b| {
            let ra = self.gains.get(a, i) * self.powers[a];
            let rb = self.gains.get(b, i) * self.powers[b];
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for slot in 0..c {
            match interferers.get(slot) {
                Some(&j) => {
                    obs.push(snr(self.gains.get(j, i)));
                    obs.push(self.powers[j] / pm);
                }
                None => obs.extend([0.0, 0.0]),
            }
        }
        let mut victims: Vec<usize> = (0..n).filter(|&k| k != i).collect();
        victims.sort_by(|&a, &b| self.gains.get(i, b).total_cmp(&self.gains.get(i, a)).then(a.cmp(&b)));
        for slot in 0..c {
            obs.push(victims.get(slot).map_or(0.0, |&k| snr(self.gains.get(i, k))));
        }
        obs
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        (0..self.cfg.n_links).map(|i| self.observe(i)).collect()
    }

    pub fn apply_action(&self, power: f64, action: usize) -> Result<f64> {
        if action == POWER_OFF {
            return Ok(0.0);
        }
        let db = POWER_DELTAS_DB.get(action).ok_or(Error::Domain(format!(
            "power action {action} outside 0..{N_POWER_ACTIONS}"
        )))?;
        Ok((power * 10f64.powf(db / 10.0)).clamp(self.cfg.p_min_on, self.cfg.p_max))
    }

    /// Apply every agent's action, score the new powers on the current
    /// gains, then advance the fading one slot.
    pub fn step(&mut self, actions: &[usize]) -> Result<(f64, PowerStepInfo)> {
        if actions.len() != self.cfg.n_links {
            return Err(Error::domain(format!(
                "{} actions for {} agents",
                actions.len(),
                self.cfg.n_links
            )));
        }
        let powers = actions
            .iter()
            .zip(&self.powers)
            .map(|(&a, &p)| self.apply_action(p, a))
            .collect::<Result<Vec<_>>>()?;
        self.set_powers_and_advance(powers)
    }

    /// Score an explicit power vector and advance the fading one slot.
    pub fn set_powers_and_advance(&mut self, powers: Vec<f64>) -> Result<(f64, PowerStepInfo)> {
        let reward = sum_rate(&self.gains, &powers, &self.weights, self.cfg.noise, self.cfg.log_base)?;
        let sinr = self.gains.sinr(&powers, self.cfg.noise);
        let rates = sinr.iter().map(|s| self.cfg.log_base.log1p(*s)).collect();
        let info = PowerStepInfo {
            gains: self.gains.clone(),
            powers: powers.clone(),
            sinr,
            rates,
        };
        self.powers = powers;
        self.fading.evolve(&mut self.rng);
        self.gains = self.fading.gains();
        self.slot += 1;
        Ok((reward, info))
    }

    /// WMMSE objective on the current gains (perfect-CSI benchmark).
    pub fn wmmse_objective(&self) -> Result<f64> {
        let sol = wmmse_power(&self.gains, &self.weights, self.cfg.p_max, self.cfg.noise, 1e-6, 500)?;
        sum_rate(&self.gains, &sol.powers, &self.weights, self.cfg.noise, self.cfg.log_base)
    }
}

/// Exhaustive search over joint action sequences of length `horizon`,
/// replaying the environment's own randomness. Returns the best total
/// reward and its first joint action.
pub fn rollout_oracle(env: &PowerEnv, horizon: usize) -> Result<(f64, Vec<usize>)> {
    let n = env.cfg.n_links;
    let joint = (N_POWER_ACTIONS as u64).checked_pow(n as u32).filter(|&j| {
        j.checked_pow(horizon as u32).is_some_and(|t| t <= crate::opt::BRUTE_FORCE_LIMIT)
    });
    let joint = joint.ok_or_else(|| Error::Size("rollout tree too large".into()))? as usize;
    fn decode(mut code: usize, n: usize) -> Vec<usize> {
        (0..n)
            .map(|_| {
                let a = code % N_POWER_ACTIONS;
                code /= N_POWER_ACTIONS;
                a
            })
            .collect()
    }
    fn search(env: &PowerEnv, depth: usize, joint: usize) -> Result<(f64, usize)> {
        if depth == 0 {
            return Ok((0.0, 0));
        }
        let mut best = (f64::NEG_INFINITY, 0);
        for code in 0..joint {
            let mut next = env.clone();
            let (r, _) = next.step(&decode(code, env.cfg.n_links))?;
            let (rest, _) = search(&next, depth - 1, joint)?;
            if r + rest > best.0 {
                best = (r + rest, code);
            }
        }
        Ok(best)
    }
    let (value, code) = search(env, horizon, joint)?;
    Ok((value, decode(code, n)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrainConfig {
    pub episodes: usize,
    pub slots_per_episode: usize,
    pub dqn: DqnConfig,
    pub exploration: ExplorationSchedule,
    /// Environment slots between gradient steps.
    pub train_every: usize,
    /// Multiplier on the sum-rate reward stored for learning.
    pub reward_scale: f64,
}

impl Default for PowerTrainConfig {
    fn default() -> Self {
        Self {
            episodes: 1000,
            slots_per_episode: 100,
            dqn: DqnConfig {
                hidden: vec![64, 32],
                gamma: 0.7,
                batch_size: 64,
                replay_capacity: 20_000,
                warmup: 500,
                ..DqnConfig::default()
            },
            exploration: ExplorationSchedule {
                start: 0.5,
                end: 0.02,
                anneal_steps: 20_000,
            },
            train_every: 1,
            reward_scale: 0.1,
        }
    }
}

/// Train one shared DQN from every agent's experience. Each episode draws a
/// fresh channel realization.
pub fn train_power_dqn(env_cfg: &PowerEnvConfig, train: &PowerTrainConfig, seed: u64) -> Result<(DqnLearner, TrainingLog)> {
    env_cfg.validate()?;
    if train.train_every == 0 || !(train.reward_scale > 0.0 && train.reward_scale.is_finite()) {
        return Err(Error::config("train_every and reward_scale must be positive"));
    }
    let mut learner = DqnLearner::new(
        env_cfg.observation_width(),
        N_POWER_ACTIONS,
        train.dqn.clone(),
        derive_seed(seed, 0),
    )?;
    let mut rng = seeded(derive_seed(seed, 1));
    let mut log = TrainingLog::default();
    let mut step = 0u64;
    for episode in 0..train.episodes {
        let mut env = PowerEnv::reset(env_cfg, derive_seed(seed, 1000 + episode as u64))?;
        let mut obs = env.observations();
        let mut last_loss = None;
        let mut reward_sum = 0.0;
        let mut q_sum = 0.0;
        for _ in 0..train.slots_per_episode {
            let eps = train.exploration.epsilon(step);
            let mut actions = Vec::with_capacity(obs.len());
            for o in &obs {
                let q = learner.q_values(o)?;
                q_sum += q.iter().sum::<f64>() / q.len() as f64;
                actions.push(crate::rl::epsilon_greedy(&q, eps, &mut rng));
            }
            let (reward, _) = env.step(&actions)?;
            let next = env.observations();
            for (i, &a) in actions.iter().enumerate() {
                learner.remember(Experience {
                    state: obs[i].clone(),
                    action: a,
                    reward: reward * train.reward_scale,
                    next_state: next[i].clone(),
                    terminal: false,
                });
            }
            obs = next;
            reward_sum += reward;
            step += 1;
            if step % train.train_every as u64 == 0 {
                if let Some(l) = learner.train(&mut rng)? {
                    last_loss = Some(l);
                }
            }
        }
        let slots = train.slots_per_episode.max(1) as f64;
        log.push(LogRow {
            step,
            episode: episode as u64,
            epsilon: train.exploration.epsilon(step),
            loss: last_loss,
            mean_q: q_sum / (slots * env_cfg.n_links as f64),
            reward: reward_sum / slots,
        });
    }
    Ok((learner, log))
}

/// How each transmitter picks its power during evaluation.
pub enum PowerPolicy<'a> {
    Dqn(&'a DqnLearner),
    FullPower,
    Random,
    Wmmse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerEvalSummary {
    pub slots: usize,
    pub mean_sum_rate: f64,
    pub mean_wmmse_rate: f64,
    /// `mean_sum_rate / mean_wmmse_rate`.
    pub ratio: f64,
    /// CSV `slot,link,power_w,sinr_db,rate`.
    pub trace_csv: String,
}

/// Run `episodes` fresh channel drops of `slots` each; compare against
/// WMMSE with perfect CSI on the same gains every slot.
pub fn evaluate_power_policy(
    env_cfg: &PowerEnvConfig,
    policy: &PowerPolicy<'_>,
    episodes: usize,
    slots: usize,
    seed: u64,
) -> Result<PowerEvalSummary> {
    let mut rng = seeded(derive_seed(seed, 2));
    let mut total = 0.0;
    let mut total_wmmse = 0.0;
    let mut trace = String::from("slot,link,power_w,sinr_db,rate\n");
    let mut slot_index = 0usize;
    for ep in 0..episodes {
        let mut env = PowerEnv::reset(env_cfg, derive_seed(seed, 5000 + ep as u64))?;
        for _ in 0..slots {
            total_wmmse += env.wmmse_objective()?;
            let (reward, info) = match policy {
                PowerPolicy::Dqn(learner) => {
                    let actions = env
                        .observations()
                        .iter()
                        .map(|o| learner.act(o, 0.0, &mut rng))
                        .collect::<Result<Vec<_>>>()?;
                    env.step(&actions)?
                }
                PowerPolicy::FullPower => env.set_powers_and_advance(vec![env_cfg.p_max; env_cfg.n_links])?,
                PowerPolicy::Random => {
                    let actions: Vec<usize> = (0..env_cfg.n_links).map(|_| rng.random_range(0..N_POWER_ACTIONS)).collect();
                    env.step(&actions)?
                }
                PowerPolicy::Wmmse => {
                    let sol = wmmse_power(env.gains(), env.weights(), env_cfg.p_max, env_cfg.noise, 1e-6, 500)?;
                    env.set_powers_and_advance(sol.powers)?
                }
            };
            total += reward;
            for i in 0..env_cfg.n_links {
                let _ = writeln!(
                    trace,
                    "{},{},{},{},{}",
                    slot_index,
                    i,
                    info.powers[i],
                    10.0 * info.sinr[i].log10(),
                    info.rates[i]
                );
            }
            slot_index += 1;
        }
    }
    let n = (episodes * slots).max(1) as f64;
    Ok(PowerEvalSummary {
        slots: episodes * slots,
        mean_sum_rate: total / n,
        mean_wmmse_rate: total_wmmse / n,
        ratio: total / total_wmmse,
        trace_csv: trace,
    })
}
