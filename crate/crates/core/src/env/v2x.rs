//! Vehicular spectrum sharing: V2V agents pick a resource block and a power
//! level each slot to deliver a payload before a deadline while the V2I
//! uplinks keep their preassigned RBs.

use std::fmt::Write as _;

use rand::Rng;

use crate::channel::{
    init_vehicular_topology, step_mobility, HighwayConfig, V2xChannelConfig, V2xGains, V2xLargeScale, VehicularTopology,
};
use crate::nn::MlpParams;
use crate::rl::{DqnConfig, DqnLearner, Experience, LogRow, TrainingLog};
use crate::rng::{derive_seed, seeded, SimRng};
use crate::{Error, Result};

pub const DEFAULT_POWER_LEVELS_DBM: [f64; 4] = [23.0, 10.0, 5.0, -100.0];

/// Signed dB of a power ratio over 30 dB, floored at -60 dB.
fn ratio_feature(x: f64) -> f64 {
    10.0 * x.max(1e-6).log10() / 30.0
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    /// `l_c sum C^c + l_v sum C^v - l_p (T - U)` over all links.
    Weighted,
    /// As `Weighted`, but a delivered link contributes `beta / K` instead
    /// of its rate.
    Beta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardConfig {
    pub mode: RewardMode,
    pub lambda_c: f64,
    pub lambda_v: f64,
    pub lambda_p: f64,
    /// In bits/s; `None` picks twice the empirical bound at run start.
    pub beta: Option<f64>,
    /// Multiplies every rate term (and beta) before weighting.
    pub rate_scale: f64,
    pub split: RewardSplit,
}

/// How the V2V term is shared among agents during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardSplit {
    /// Every agent receives the same system-wide reward.
    Shared,
    /// Each agent's V2V term covers its own link only.
    PerLink,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            mode: RewardMode::Beta,
            lambda_c: 0.1,
            lambda_v: 0.9,
            lambda_p: 0.0,
            beta: None,
            rate_scale: 1e-7,
            split: RewardSplit::Shared,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct V2xConfig {
    pub highway: HighwayConfig,
    pub channel: V2xChannelConfig,
    pub payload_bytes: f64,
    /// Slots per episode.
    pub horizon: usize,
    pub slot_s: f64,
    pub bandwidth_hz: f64,
    pub noise_dbm: f64,
    pub v2i_power_dbm: f64,
    /// Discrete V2V power levels; the last one means "off" (zero watts).
    pub power_levels_dbm: Vec<f64>,
    /// Nearest V2V transmitters whose last RB choice each agent sees.
    pub neighbors: usize,
    /// Slots between mobility/large-scale refreshes.
    pub large_scale_period: usize,
    pub reward: RewardConfig,
    /// Delivered links stop transmitting for the rest of the episode.
    pub stop_after_delivery: bool,
}

/// Lumped V2V reference loss at 1 m (propagation, antennas, receiver
/// noise figure). With it roughly a third of the random-policy links miss
/// the deadline on the default highway.
pub const DESK_V2V_REF_LOSS_DB: f64 = 85.0;

impl Default for V2xConfig {
    fn default() -> Self {
        let mut channel = V2xChannelConfig::default();
        channel.v2v.ref_loss_db = DESK_V2V_REF_LOSS_DB;
        Self {
            highway: HighwayConfig::default(),
            channel,
            payload_bytes: 1060.0,
            horizon: 100,
            slot_s: 1e-3,
            bandwidth_hz: 1e6,
            noise_dbm: -114.0,
            v2i_power_dbm: 23.0,
            power_levels_dbm: DEFAULT_POWER_LEVELS_DBM.to_vec(),
            neighbors: 3,
            large_scale_period: 100,
            reward: RewardConfig::default(),
            stop_after_delivery: true,
        }
    }
}

impl V2xConfig {
    /// Default world with per-link V2V reward terms, the setting used for
    /// the MARL comparison against the random baseline.
    pub fn desk() -> Self {
        let mut cfg = Self::default();
        cfg.reward.split = RewardSplit::PerLink;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.highway.m_v2i == 0 || self.highway.k_v2v == 0 {
            return Err(Error::config("need at least one V2I and one V2V link"));
        }
        if self.power_levels_dbm.len() < 2 {
            return Err(Error::config("need at least one power level plus off"));
        }
        if self.power_levels_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::config("power levels must be finite"));
        }
        if !(self.payload_bytes > 0.0 && self.slot_s > 0.0 && self.bandwidth_hz > 0.0) {
            return Err(Error::config("payload, slot length and bandwidth must be positive"));
        }
        if self.horizon == 0 || self.large_scale_period == 0 {
            return Err(Error::config("horizon and refresh period must be positive"));
        }
        if !self.noise_dbm.is_finite() || !self.v2i_power_dbm.is_finite() {
            return Err(Error::config("noise and V2I power must be finite"));
        }
        let r = &self.reward;
        if !(r.lambda_c >= 0.0 && r.lambda_v >= 0.0 && r.lambda_p >= 0.0 && r.rate_scale > 0.0) {
            return Err(Error::config("reward weights must be nonnegative"));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.highway.m_v2i
    }

    pub fn k(&self) -> usize {
        self.highway.k_v2v
    }

    pub fn n_levels(&self) -> usize {
        self.power_levels_dbm.len()
    }

    pub fn n_actions(&self) -> usize {
        self.m() * self.n_levels()
    }

    pub fn observation_width(&self, fingerprint: bool) -> usize {
        4 * self.m() + 2 + if fingerprint { 2 } else { 0 }
    }

    pub fn noise_w(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    fn level_watts(&self, level: usize) -> f64 {
        if level + 1 == self.n_levels() {
            0.0
        } else {
            dbm_to_watts(self.power_levels_dbm[level])
        }
    }

    fn max_watts(&self) -> f64 {
        (0..self.n_levels()).map(|l| self.level_watts(l)).fold(0.0, f64::max)
    }
}

/// Largest interference-free sum V2V rate bound `K W log2(1 + SINR_max)`,
/// where `SINR_max` is the best single-link SNR at full power over
/// `worlds` random drops.
pub fn empirical_rate_bound(cfg: &V2xConfig, worlds: usize, seed: u64) -> Result<f64> {
    cfg.validate()?;
    let p = cfg.max_watts();
    let mut best_snr = 0.0f64;
    for w in 0..worlds as u64 {
        let topo = init_vehicular_topology(&cfg.highway, derive_seed(seed, 2 * w))?;
        let mut rng = seeded(derive_seed(seed, 2 * w + 1));
        let large = V2xLargeScale::compute(&topo, &cfg.channel, &mut rng);
        let gains = V2xGains::draw(&large, &mut rng);
        for g in &gains.v2v_signal {
            best_snr = best_snr.max(p * g / cfg.noise_w());
        }
    }
    Ok(cfg.k() as f64 * cfg.bandwidth_hz * (1.0 + best_snr).log2())
}

/// The beta constant for a run: explicit values are checked against the
/// empirical bound over 100 drops, absent ones default to twice it.
pub fn resolve_beta(cfg: &V2xConfig, seed: u64) -> Result<f64> {
    let bound = empirical_rate_bound(cfg, 100, derive_seed(seed, 0xBE7A))?;
    match cfg.reward.beta {
        Some(b) if b > bound => Ok(b),
        Some(b) => Err(Error::config(format!(
            "beta {b} must exceed the largest sum V2V rate bound {bound}"
        ))),
        None => Ok(2.0 * bound),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct V2xAction {
    pub rb: usize,
    pub level: usize,
}

impl V2xAction {
    pub fn from_index(index: usize, n_levels: usize) -> Self {
        Self {
            rb: index / n_levels,
            level: index % n_levels,
        }
    }

    pub fn index(self, n_levels: usize) -> usize {
        self.rb * n_levels + self.level
    }
}

/// Per-slot outcome; capacities in bits/s.
#[derive(Debug, Clone, PartialEq)]
pub struct V2xStepInfo {
    pub actions: Vec<V2xAction>,
    /// Transmit power actually used (zero when off or silenced).
    pub powers_w: Vec<f64>,
    pub v2i_rates: Vec<f64>,
    pub v2v_rates: Vec<f64>,
    pub remaining_before: Vec<f64>,
    pub remaining_after: Vec<f64>,
    pub u_before: usize,
    pub done: bool,
}

impl V2xStepInfo {
    pub fn delivered_before(&self, k: usize) -> bool {
        self.remaining_before[k] <= 0.0
    }

    pub fn delivered_now(&self, k: usize) -> bool {
        self.remaining_before[k] > 0.0 && self.remaining_after[k] <= 0.0
    }
}

fn v2v_component(info: &V2xStepInfo, link: usize, mode: RewardMode, beta: f64) -> f64 {
    match mode {
        RewardMode::Beta if info.delivered_before(link) => beta / info.v2v_rates.len() as f64,
        _ => info.v2v_rates[link],
    }
}

/// Shared reward of one slot; see [`RewardMode`].
pub fn v2x_reward(info: &V2xStepInfo, reward: &RewardConfig, beta: f64, horizon: usize) -> f64 {
    let v2v: f64 = (0..info.v2v_rates.len())
        .map(|j| v2v_component(info, j, reward.mode, beta))
        .sum();
    shaped(info, reward, v2v, horizon)
}

/// Reward of one V2V agent when only its own link enters the V2V term;
/// the V2I and latency terms stay shared.
pub fn v2x_link_reward(info: &V2xStepInfo, link: usize, reward: &RewardConfig, beta: f64, horizon: usize) -> f64 {
    shaped(info, reward, v2v_component(info, link, reward.mode, beta), horizon)
}

fn shaped(info: &V2xStepInfo, reward: &RewardConfig, v2v: f64, horizon: usize) -> f64 {
    let s = reward.rate_scale;
    let v2i: f64 = info.v2i_rates.iter().sum();
    reward.lambda_c * s * v2i + reward.lambda_v * s * v2v - reward.lambda_p * (horizon - info.u_before) as f64
}

#[derive(Debug, Clone)]
pub struct V2xWorld {
    cfg: V2xConfig,
    beta: f64,
    topo: VehicularTopology,
    large: V2xLargeScale,
    gains: V2xGains,
    rng: SimRng,
    neighbors: Vec<Vec<usize>>,
    remaining: Vec<f64>,
    u: usize,
    slot: u64,
    /// `[k * m + rb]` interference seen by V2V receiver `k` last slot.
    prev_interference: Vec<f64>,
    /// RB each V2V link transmitted on last slot.
    prev_rb: Vec<Option<usize>>,
    delivered_at: Vec<Option<usize>>,
}

/// Fresh world with beta resolved from the same seed.
pub fn v2x_reset(cfg: &V2xConfig, seed: u64) -> Result<V2xWorld> {
    let beta = resolve_beta(cfg, seed)?;
    V2xWorld::reset(cfg, seed, beta)
}

impl V2xWorld {
    pub fn reset(cfg: &V2xConfig, seed: u64, beta: f64) -> Result<Self> {
        cfg.validate()?;
        let topo = init_vehicular_topology(&cfg.highway, derive_seed(seed, 0))?;
        let mut rng = seeded(derive_seed(seed, 1));
        let large = V2xLargeScale::compute(&topo, &cfg.channel, &mut rng);
        let gains = V2xGains::draw(&large, &mut rng);
        Ok(Self::from_parts(cfg, beta, topo, large, gains, rng))
    }

    /// World over given gains; used to freeze the channel in tests.
    pub fn from_parts(
        cfg: &V2xConfig,
        beta: f64,
        topo: VehicularTopology,
        large: V2xLargeScale,
        gains: V2xGains,
        rng: SimRng,
    ) -> Self {
        let k = cfg.k();
        let neighbors = (0..k).map(|j| topo.nearest_v2v_transmitters(j, cfg.neighbors)).collect();
        let mut world = Self {
            cfg: cfg.clone(),
            beta,
            topo,
            large,
            gains,
            rng,
            neighbors,
            remaining: vec![cfg.payload_bytes; k],
            u: cfg.horizon,
            slot: 0,
            prev_interference: Vec::new(),
            prev_rb: vec![None; k],
            delivered_at: vec![None; k],
        };
        world.prev_interference = world.interference(&[], &[]);
        world
    }

    pub fn config(&self) -> &V2xConfig {
        &self.cfg
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn topology(&self) -> &VehicularTopology {
        &self.topo
    }

    pub fn gains(&self) -> &V2xGains {
        &self.gains
    }

    pub fn set_gains(&mut self, gains: V2xGains) {
        self.gains = gains;
    }

    pub fn remaining(&self) -> &[f64] {
        &self.remaining
    }

    pub fn remaining_time(&self) -> usize {
        self.u
    }

    pub fn is_done(&self) -> bool {
        self.u == 0
    }

    pub fn delivered_at(&self) -> &[Option<usize>] {
        &self.delivered_at
    }

    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    /// Start a new episode in the same world: full payloads and deadline.
    pub fn restart_episode(&mut self) {
        let k = self.cfg.k();
        self.remaining = vec![self.cfg.payload_bytes; k];
        self.u = self.cfg.horizon;
        self.prev_rb = vec![None; k];
        self.delivered_at = vec![None; k];
        self.prev_interference = self.interference(&[], &[]);
    }

    /// Interference plus nothing else at each V2V receiver on each RB for
    /// the given transmissions (`rbs[j]` used with `powers[j]`).
    fn interference(&self, rbs: &[usize], powers: &[f64]) -> Vec<f64> {
        let (m, k) = (self.cfg.m(), self.cfg.k());
        let pc = dbm_to_watts(self.cfg.v2i_power_dbm);
        let mut out = vec![0.0; k * m];
        for to in 0..k {
            for rb in 0..m {
                let mut i = pc * self.gains.v2i_to_v2v(rb, to);
                for (from, (&r, &p)) in rbs.iter().zip(powers).enumerate() {
                    if from != to && r == rb {
                        i += p * self.gains.v2v_cross(from, to, rb);
                    }
                }
                out[to * m + rb] = i;
            }
        }
        out
    }

    /// Local observation of agent `k`: own V2V and V2V-to-BS gains per RB,
    /// last slot's interference per RB, neighbours' last RB choices, then
    /// remaining load and time. `fingerprint` appends `(epsilon, e)`.
    pub fn observe(&self, k: usize, fingerprint: Option<(f64, f64)>) -> Vec<f64> {
        let m = self.cfg.m();
        let noise = self.cfg.noise_w();
        let p = self.cfg.max_watts();
        let mut obs = Vec::with_capacity(self.cfg.observation_width(fingerprint.is_some()));
        obs.extend((0..m).map(|rb| ratio_feature(self.gains.v2v_signal(k, rb) * p / noise)));
        obs.extend((0..m).map(|rb| ratio_feature(self.gains.v2v_to_bs(k, rb) * p / noise)));
        obs.extend((0..m).map(|rb| ratio_feature(self.prev_interference[k * m + rb] / noise)));
        let mut counts = vec![0.0; m];
        for &j in &self.neighbors[k] {
            if let Some(rb) = self.prev_rb[j] {
                counts[rb] += 1.0;
            }
        }
        obs.extend(counts);
        obs.push(self.remaining[k] / self.cfg.payload_bytes);
        obs.push(self.u as f64 / self.cfg.horizon as f64);
        if let Some((eps, e)) = fingerprint {
            obs.push(eps);
            obs.push(e);
        }
        obs
    }

    pub fn step(&mut self, actions: &[V2xAction]) -> Result<V2xStepInfo> {
        let (m, k) = (self.cfg.m(), self.cfg.k());
        if actions.len() != k {
            return Err(Error::domain(format!("expected {k} actions, got {}", actions.len())));
        }
        if self.u == 0 {
            return Err(Error::domain("episode already finished"));
        }
        for a in actions {
            if a.rb >= m || a.level >= self.cfg.n_levels() {
                return Err(Error::domain(format!("invalid action {a:?}")));
            }
        }
        let noise = self.cfg.noise_w();
        let pc = dbm_to_watts(self.cfg.v2i_power_dbm);
        let powers: Vec<f64> = actions
            .iter()
            .enumerate()
            .map(|(j, a)| {
                if self.cfg.stop_after_delivery && self.remaining[j] <= 0.0 {
                    0.0
                } else {
                    self.cfg.level_watts(a.level)
                }
            })
            .collect();
        let rbs: Vec<usize> = actions.iter().map(|a| a.rb).collect();
        let v2i_rates = (0..m)
            .map(|rb| {
                let i: f64 = (0..k)
                    .filter(|&j| rbs[j] == rb)
                    .map(|j| powers[j] * self.gains.v2v_to_bs(j, rb))
                    .sum();
                self.rate(pc * self.gains.v2i_signal(rb) / (noise + i))
            })
            .collect();
        let interference = self.interference(&rbs, &powers);
        let v2v_rates: Vec<f64> = (0..k)
            .map(|j| {
                let rb = rbs[j];
                self.rate(powers[j] * self.gains.v2v_signal(j, rb) / (noise + interference[j * m + rb]))
            })
            .collect();
        let remaining_before = self.remaining.clone();
        let elapsed = self.cfg.horizon - self.u;
        for j in 0..k {
            let sent = v2v_rates[j] * self.cfg.slot_s / 8.0;
            self.remaining[j] = (self.remaining[j] - sent).max(0.0);
            if remaining_before[j] > 0.0 && self.remaining[j] <= 0.0 {
                self.delivered_at[j] = Some(elapsed);
            }
        }
        let u_before = self.u;
        self.u -= 1;
        self.prev_interference = interference;
        self.prev_rb = (0..k).map(|j| (powers[j] > 0.0).then_some(rbs[j])).collect();
        self.advance_channel();
        Ok(V2xStepInfo {
            actions: actions.to_vec(),
            powers_w: powers,
            v2i_rates,
            v2v_rates,
            remaining_before,
            remaining_after: self.remaining.clone(),
            u_before,
            done: self.u == 0,
        })
    }

    pub fn reward(&self, info: &V2xStepInfo) -> f64 {
        v2x_reward(info, &self.cfg.reward, self.beta, self.cfg.horizon)
    }

    /// Training reward of agent `link` under the configured split.
    pub fn agent_reward(&self, info: &V2xStepInfo, link: usize) -> f64 {
        match self.cfg.reward.split {
            RewardSplit::Shared => self.reward(info),
            RewardSplit::PerLink => v2x_link_reward(info, link, &self.cfg.reward, self.beta, self.cfg.horizon),
        }
    }

    fn rate(&self, sinr: f64) -> f64 {
        self.cfg.bandwidth_hz * sinr.log2_1p()
    }

    fn advance_channel(&mut self) {
        self.slot += 1;
        if self.slot % self.cfg.large_scale_period as u64 == 0 {
            let dt = self.cfg.large_scale_period as f64 * self.cfg.slot_s;
            self.topo = step_mobility(&self.topo, dt);
            self.large = V2xLargeScale::compute(&self.topo, &self.cfg.channel, &mut self.rng);
            self.neighbors = (0..self.cfg.k())
                .map(|j| self.topo.nearest_v2v_transmitters(j, self.cfg.neighbors))
                .collect();
        }
        self.gains = V2xGains::draw(&self.large, &mut self.rng);
    }
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V2xTrainMode {
    /// One shared network; a single agent revises its action per slot.
    SingleAgentTurnTaking,
    /// One network per agent, all acting every slot.
    MarlFingerprint,
}

impl V2xTrainMode {
    pub fn default_fingerprint(self) -> bool {
        matches!(self, V2xTrainMode::MarlFingerprint)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct V2xTrainConfig {
    pub mode: V2xTrainMode,
    pub episodes: usize,
    pub dqn: DqnConfig,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of the episodes over which epsilon anneals linearly.
    pub anneal_fraction: f64,
    /// Append `(epsilon, e)` to observations; `None` follows the mode.
    pub fingerprint: Option<bool>,
}

impl Default for V2xTrainConfig {
    fn default() -> Self {
        Self {
            mode: V2xTrainMode::MarlFingerprint,
            episodes: 300,
            dqn: DqnConfig {
                hidden: vec![64, 32],
                gamma: 0.9,
                batch_size: 32,
                replay_capacity: 20_000,
                target_sync: 200,
                warmup: 500,
                ..DqnConfig::default()
            },
            eps_start: 1.0,
            eps_end: 0.02,
            anneal_fraction: 0.8,
            fingerprint: None,
        }
    }
}

impl V2xTrainConfig {
    pub fn uses_fingerprint(&self) -> bool {
        self.fingerprint.unwrap_or(self.mode.default_fingerprint())
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        let span = (self.anneal_fraction * self.episodes as f64).max(1.0);
        let frac = (episode as f64 / span).min(1.0);
        self.eps_start + (self.eps_end - self.eps_start) * frac
    }
}

/// Trained V2X controllers.
#[derive(Debug, Clone)]
pub struct V2xAgents {
    pub mode: V2xTrainMode,
    pub fingerprint: bool,
    /// One network for turn-taking, one per V2V link otherwise.
    pub networks: Vec<MlpParams>,
}

impl V2xAgents {
    /// Check that the networks fit the environment.
    pub fn check(&self, cfg: &V2xConfig) -> Result<()> {
        let expected_nets = match self.mode {
            V2xTrainMode::SingleAgentTurnTaking => 1,
            V2xTrainMode::MarlFingerprint => cfg.k(),
        };
        if self.networks.len() != expected_nets {
            return Err(Error::config(format!(
                "{} networks for {expected_nets} agents",
                self.networks.len()
            )));
        }
        let width = cfg.observation_width(self.fingerprint);
        for net in &self.networks {
            if net.input_width() != width {
                return Err(Error::Compatibility {
                    expected: net.input_width(),
                    found: width,
                });
            }
            if net.output_width() != cfg.n_actions() {
                return Err(Error::Compatibility {
                    expected: net.output_width(),
                    found: cfg.n_actions(),
                });
            }
        }
        Ok(())
    }

    fn net(&self, k: usize) -> &MlpParams {
        match self.mode {
            V2xTrainMode::SingleAgentTurnTaking => &self.networks[0],
            V2xTrainMode::MarlFingerprint => &self.networks[k],
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Which agents revise their action in `slot` under `mode`.
fn movers(mode: V2xTrainMode, slot: usize, k: usize) -> Vec<usize> {
    match mode {
        V2xTrainMode::MarlFingerprint => (0..k).collect(),
        V2xTrainMode::SingleAgentTurnTaking if slot == 0 => (0..k).collect(),
        V2xTrainMode::SingleAgentTurnTaking => vec![slot % k],
    }
}

/// Centralized training. Each episode draws a fresh world; all agents
/// receive the shared reward.
pub fn v2x_train(cfg: &V2xConfig, train: &V2xTrainConfig, seed: u64) -> Result<(V2xAgents, TrainingLog)> {
    cfg.validate()?;
    let beta = resolve_beta(cfg, seed)?;
    let k = cfg.k();
    let nl = cfg.n_levels();
    let fp = train.uses_fingerprint();
    let width = cfg.observation_width(fp);
    let n_nets = match train.mode {
        V2xTrainMode::SingleAgentTurnTaking => 1,
        V2xTrainMode::MarlFingerprint => k,
    };
    let mut learners = (0..n_nets)
        .map(|j| DqnLearner::new(width, cfg.n_actions(), train.dqn.clone(), derive_seed(seed, 100 + j as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = seeded(derive_seed(seed, 1));
    let mut log = TrainingLog::default();
    let mut step = 0u64;
    for ep in 0..train.episodes {
        let eps = train.epsilon(ep);
        let e = ep as f64 / train.episodes as f64;
        let print = fp.then_some((eps, e));
        let mut world = V2xWorld::reset(cfg, derive_seed(seed, 10_000 + ep as u64), beta)?;
        let mut current = vec![V2xAction { rb: 0, level: 0 }; k];
        let mut total = 0.0;
        let mut loss = None;
        let mean_q = mean(&learners[0].q_values(&world.observe(0, print))?);
        for slot in 0..cfg.horizon {
            let who = movers(train.mode, slot, k);
            let mut states = Vec::with_capacity(who.len());
            for &j in &who {
                let s = world.observe(j, print);
                let net = if n_nets == 1 { 0 } else { j };
                current[j] = V2xAction::from_index(learners[net].act(&s, eps, &mut rng)?, nl);
                states.push(s);
            }
            let info = world.step(&current)?;
            let r = world.reward(&info);
            total += r;
            for (&j, s) in who.iter().zip(states) {
                let net = if n_nets == 1 { 0 } else { j };
                learners[net].remember(Experience {
                    state: s,
                    action: current[j].index(nl),
                    reward: world.agent_reward(&info, j),
                    next_state: world.observe(j, print),
                    terminal: info.done,
                });
            }
            for learner in learners.iter_mut() {
                if let Some(l) = learner.train(&mut rng)? {
                    if !l.is_finite() {
                        return Err(Error::Numeric(format!("loss diverged in episode {ep}")));
                    }
                    loss = Some(l);
                }
            }
            step += 1;
        }
        log.push(LogRow {
            step,
            episode: ep as u64,
            epsilon: eps,
            loss,
            mean_q,
            reward: total / cfg.horizon as f64,
        });
    }
    Ok((
        V2xAgents {
            mode: train.mode,
            fingerprint: fp,
            networks: learners.into_iter().map(|l| l.online).collect(),
        },
        log,
    ))
}

pub enum V2xPolicy<'a> {
    Agents(&'a V2xAgents),
    /// Uniform RB and power level every slot.
    Random,
    AlwaysOff,
    /// Strongest own RB at full power.
    BestRbFullPower,
    /// Link `k` always on RB `k mod M` at full power.
    OrthogonalFullPower,
    /// Uniform RB at full power.
    RandomRbFullPower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct V2xEvalSummary {
    pub episodes: usize,
    /// Fraction of (episode, link) pairs whose payload arrived in time.
    pub delivery_rate: f64,
    /// Mean per-slot sum rates, bits/s.
    pub mean_v2i_sum_rate: f64,
    pub mean_v2v_sum_rate: f64,
    /// Delivery slot per (episode, link), row-major by episode.
    pub delivery_times: Vec<Option<usize>>,
    /// CSV `slot,link_id,rb,power_dbm,v2v_rate,v2i_rate,remaining_bytes`
    /// of the first episode.
    pub trace_csv: String,
}

fn full_level(cfg: &V2xConfig) -> usize {
    (0..cfg.n_levels() - 1)
        .max_by(|&a, &b| cfg.power_levels_dbm[a].total_cmp(&cfg.power_levels_dbm[b]))
        .unwrap_or(0)
}

/// Greedy execution over `episodes` fresh worlds. Episode `e` uses the
/// world seed `derive_seed(seed, e)` for every policy, so summaries of
/// different policies are paired.
pub fn evaluate_v2x(cfg: &V2xConfig, policy: &V2xPolicy<'_>, episodes: usize, seed: u64) -> Result<V2xEvalSummary> {
    cfg.validate()?;
    if let V2xPolicy::Agents(agents) = policy {
        agents.check(cfg)?;
    }
    let (m, k, nl) = (cfg.m(), cfg.k(), cfg.n_levels());
    let mut rng = seeded(derive_seed(seed, u64::MAX));
    let mut delivered = 0usize;
    let mut v2i_sum = 0.0;
    let mut v2v_sum = 0.0;
    let mut delivery_times = Vec::with_capacity(episodes * k);
    let mut trace = String::from("slot,link_id,rb,power_dbm,v2v_rate,v2i_rate,remaining_bytes\n");
    for ep in 0..episodes {
        // Beta only shapes the training reward; evaluation ignores it.
        let mut world = V2xWorld::reset(cfg, derive_seed(seed, ep as u64), 0.0)?;
        let mut current = vec![V2xAction { rb: 0, level: nl - 1 }; k];
        for slot in 0..cfg.horizon {
            match policy {
                V2xPolicy::Agents(agents) => {
                    let print = agents.fingerprint.then_some((0.0, 1.0));
                    for j in movers(agents.mode, slot, k) {
                        let q = agents.net(j).predict(&world.observe(j, print))?;
                        current[j] = V2xAction::from_index(crate::rl::argmax(&q), nl);
                    }
                }
                V2xPolicy::Random => {
                    for a in current.iter_mut() {
                        *a = V2xAction::from_index(rng.random_range(0..m * nl), nl);
                    }
                }
                V2xPolicy::AlwaysOff => {}
                V2xPolicy::RandomRbFullPower => {
                    for a in current.iter_mut() {
                        *a = V2xAction { rb: rng.random_range(0..m), level: full_level(cfg) };
                    }
                }
                V2xPolicy::OrthogonalFullPower => {
                    for (j, a) in current.iter_mut().enumerate() {
                        *a = V2xAction { rb: j % m, level: full_level(cfg) };
                    }
                }
                V2xPolicy::BestRbFullPower => {
                    let full = full_level(cfg);
                    for (j, a) in current.iter_mut().enumerate() {
                        let g: Vec<f64> = (0..m).map(|rb| world.gains().v2v_signal(j, rb)).collect();
                        *a = V2xAction {
                            rb: crate::rl::argmax(&g),
                            level: full,
                        };
                    }
                }
            }
            let info = world.step(&current)?;
            v2i_sum += info.v2i_rates.iter().sum::<f64>();
            v2v_sum += info.v2v_rates.iter().sum::<f64>();
            if ep == 0 {
                for j in 0..k {
                    let a = info.actions[j];
                    let dbm = if info.powers_w[j] > 0.0 { cfg.power_levels_dbm[a.level] } else { cfg.power_levels_dbm[nl - 1] };
                    let _ = writeln!(
                        trace,
                        "{slot},{j},{},{dbm},{},{},{}",
                        a.rb, info.v2v_rates[j], info.v2i_rates[a.rb], info.remaining_after[j]
                    );
                }
            }
        }
        for t in world.delivered_at() {
            delivered += t.is_some() as usize;
            delivery_times.push(*t);
        }
    }
    let slots = (episodes * cfg.horizon).max(1) as f64;
    Ok(V2xEvalSummary {
        episodes,
        delivery_rate: delivered as f64 / (episodes * k).max(1) as f64,
        mean_v2i_sum_rate: v2i_sum / slots,
        mean_v2v_sum_rate: v2v_sum / slots,
        delivery_times,
        trace_csv: trace,
    })
}
