//! Declarative run configuration.
//!
//! A run file names the experiment `kind`, the master `seed`, the number of
//! `replicas`, the output directory and one section of hyperparameters for
//! that kind. Every omitted key takes the library default; `resolved()`
//! writes all of them back so the saved `config.toml` is self-describing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wra_core::channel::InterferenceGeometry;
use wra_core::env::dsa::{DsaTrainConfig, MultiUserConfig, Utility};
use wra_core::env::power::{PowerEnvConfig, PowerTrainConfig};
use wra_core::env::v2x::{RewardMode, RewardSplit, V2xConfig, V2xTrainConfig, V2xTrainMode};
use wra_core::learn_opt::{GainModel, LsapConfig, NetConfig, PowerObjective, PowerProblem, SupervisedConfig, UnsupervisedConfig};
use wra_core::nn::OptimizerKind;
use wra_core::opt::LogBase;
use wra_core::rl::{DqnConfig, ExplorationSchedule, QLearningConfig};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// Epsilon-greedy sample averages on Bernoulli arms.
    Bandit,
    /// Tabular Q-learning against value iteration on the two-channel MDP.
    Tabular,
    DsaSingle,
    DsaCoexist,
    DsaMulti,
    Power,
    V2x,
    Supervised,
    Unsupervised,
    Lsap,
    /// WMMSE, FP and brute force on random instances.
    Oracle,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Bandit => "bandit",
            Kind::Tabular => "tabular",
            Kind::DsaSingle => "dsa_single",
            Kind::DsaCoexist => "dsa_coexist",
            Kind::DsaMulti => "dsa_multi",
            Kind::Power => "power",
            Kind::V2x => "v2x",
            Kind::Supervised => "supervised",
            Kind::Unsupervised => "unsupervised",
            Kind::Lsap => "lsap",
            Kind::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    RmsProp,
    Adam,
}

impl From<Optimizer> for OptimizerKind {
    fn from(o: Optimizer) -> Self {
        match o {
            Optimizer::Sgd => OptimizerKind::Sgd,
            Optimizer::RmsProp => OptimizerKind::RmsProp,
            Optimizer::Adam => OptimizerKind::Adam,
        }
    }
}

impl From<OptimizerKind> for Optimizer {
    fn from(o: OptimizerKind) -> Self {
        match o {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::RmsProp => Optimizer::RmsProp,
            OptimizerKind::Adam => Optimizer::Adam,
        }
    }
}

/// DQN settings. Omitted keys fall back to the defaults of the section the
/// table belongs to, not to one global default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DqnSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay_capacity: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_sync: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub double_q: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<Optimizer>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup: Option<usize>,
}

impl DqnSection {
    pub fn apply(&self, base: &DqnConfig) -> DqnConfig {
        DqnConfig {
            hidden: self.hidden.clone().unwrap_or_else(|| base.hidden.clone()),
            gamma: self.gamma.unwrap_or(base.gamma),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            replay_capacity: self.replay_capacity.unwrap_or(base.replay_capacity),
            target_sync: self.target_sync.unwrap_or(base.target_sync),
            double_q: self.double_q.unwrap_or(base.double_q),
            optimizer: self.optimizer.map(Into::into).unwrap_or(base.optimizer),
            step_size: self.step_size.unwrap_or(base.step_size),
            warmup: self.warmup.unwrap_or(base.warmup),
        }
    }

    fn full(cfg: &DqnConfig) -> Self {
        Self {
            hidden: Some(cfg.hidden.clone()),
            gamma: Some(cfg.gamma),
            batch_size: Some(cfg.batch_size),
            replay_capacity: Some(cfg.replay_capacity),
            target_sync: Some(cfg.target_sync),
            double_q: Some(cfg.double_q),
            optimizer: Some(cfg.optimizer.into()),
            step_size: Some(cfg.step_size),
            warmup: Some(cfg.warmup),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditSection {
    /// Success probability of each arm.
    pub arms: Vec<f64>,
    pub steps: u64,
    pub epsilon: f64,
    /// Training pulls per logged window.
    pub log_every: u64,
    pub eval_steps: u64,
}

impl Default for BanditSection {
    fn default() -> Self {
        Self {
            arms: vec![0.2, 0.5, 0.8],
            steps: 2000,
            epsilon: 0.1,
            log_every: 100,
            eval_steps: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabularSection {
    pub p_gg: f64,
    pub p_bb: f64,
    pub gamma: f64,
    pub steps: u64,
    pub epsilon: f64,
    pub step_exponent: f64,
}

impl Default for TabularSection {
    fn default() -> Self {
        let q = QLearningConfig::default();
        Self {
            p_gg: 0.9,
            p_bb: 0.9,
            gamma: q.gamma,
            steps: q.steps,
            epsilon: q.epsilon,
            step_exponent: q.step_exponent,
        }
    }
}

impl TabularSection {
    pub fn q_learning(&self) -> QLearningConfig {
        QLearningConfig {
            steps: self.steps,
            gamma: self.gamma,
            epsilon: self.epsilon,
            step_exponent: self.step_exponent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DsaWorld {
    /// Exactly one good channel, moving to the next one every slot.
    Rotating,
    GilbertElliott,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DsaSingleSection {
    pub world: DsaWorld,
    pub channels: usize,
    /// Stay probabilities of the Gilbert-Elliott world.
    pub p_gg: f64,
    pub p_bb: f64,
    pub history: usize,
    pub steps: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub anneal_steps: u64,
    pub eval_slots: usize,
    pub dqn: DqnSection,
}

impl Default for DsaSingleSection {
    fn default() -> Self {
        let d = DsaTrainConfig::default();
        Self {
            world: DsaWorld::Rotating,
            channels: 4,
            p_gg: 0.9,
            p_bb: 0.8,
            history: d.history,
            steps: d.steps,
            eps_start: d.exploration.start,
            eps_end: d.exploration.end,
            anneal_steps: d.exploration.anneal_steps,
            eval_slots: 10_000,
            dqn: DqnSection::default(),
        }
    }
}

fn dsa_train(history: usize, steps: usize, start: f64, end: f64, anneal: u64, dqn: &DqnSection) -> DsaTrainConfig {
    DsaTrainConfig {
        history,
        steps,
        dqn: dqn.apply(&DsaTrainConfig::default().dqn),
        exploration: ExplorationSchedule {
            start,
            end,
            anneal_steps: anneal,
        },
    }
}

impl DsaSingleSection {
    pub fn train(&self) -> DsaTrainConfig {
        dsa_train(self.history, self.steps, self.eps_start, self.eps_end, self.anneal_steps, &self.dqn)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DsaCoexistSection {
    /// Slots of the repeating frame owned by the TDMA node.
    pub tdma_frame: Vec<bool>,
    pub aloha_p: f64,
    pub history: usize,
    pub steps: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub anneal_steps: u64,
    pub eval_slots: usize,
    pub dqn: DqnSection,
}

impl Default for DsaCoexistSection {
    fn default() -> Self {
        let d = DsaTrainConfig::default();
        Self {
            tdma_frame: vec![true, true, false, false],
            aloha_p: 0.0,
            history: d.history,
            steps: 10_000,
            eps_start: d.exploration.start,
            eps_end: d.exploration.end,
            anneal_steps: d.exploration.anneal_steps,
            eval_slots: 10_000,
            dqn: DqnSection::default(),
        }
    }
}

impl DsaCoexistSection {
    pub fn train(&self) -> DsaTrainConfig {
        dsa_train(self.history, self.steps, self.eps_start, self.eps_end, self.anneal_steps, &self.dqn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    SumRate,
    LogRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DsaMultiSection {
    pub users: usize,
    pub capacities: Vec<f64>,
    pub utility: UtilityKind,
    pub history: usize,
    pub steps: usize,
    pub alpha: f64,
    pub beta: f64,
    pub exec_alpha: f64,
    pub replay_off: bool,
    pub shared_reward: bool,
    pub eval_slots: usize,
    pub dqn: DqnSection,
}

impl Default for DsaMultiSection {
    fn default() -> Self {
        let m = MultiUserConfig::default();
        Self {
            users: m.users,
            capacities: m.capacities,
            utility: UtilityKind::SumRate,
            history: m.history,
            steps: m.steps,
            alpha: m.alpha,
            beta: m.beta,
            exec_alpha: m.exec_alpha,
            replay_off: m.replay_off,
            shared_reward: m.shared_reward,
            eval_slots: 2000,
            dqn: DqnSection::default(),
        }
    }
}

impl DsaMultiSection {
    pub fn multi_user(&self) -> MultiUserConfig {
        MultiUserConfig {
            users: self.users,
            capacities: self.capacities.clone(),
            utility: match self.utility {
                UtilityKind::SumRate => Utility::SumRate,
                UtilityKind::LogRate => Utility::LogRate,
            },
            history: self.history,
            steps: self.steps,
            alpha: self.alpha,
            beta: self.beta,
            exec_alpha: self.exec_alpha,
            replay_off: self.replay_off,
            shared_reward: self.shared_reward,
            dqn: self.dqn.apply(&MultiUserConfig::default().dqn),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBaseKind {
    Two,
    E,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    pub n_links: usize,
    /// Small-scale fading correlation between slots.
    pub correlation: f64,
    pub region_m: f64,
    pub p_max: f64,
    pub p_min_on: f64,
    pub noise: f64,
    pub neighbors: usize,
    pub log_base: LogBaseKind,
    pub episodes: usize,
    pub slots_per_episode: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub anneal_steps: u64,
    pub train_every: usize,
    pub reward_scale: f64,
    pub eval_episodes: usize,
    pub eval_slots: usize,
    /// Also evaluate full power and uniform random power.
    pub baselines: bool,
    pub dqn: DqnSection,
}

impl Default for PowerSection {
    fn default() -> Self {
        let e = PowerEnvConfig::default();
        let t = PowerTrainConfig::default();
        Self {
            n_links: e.n_links,
            correlation: e.geometry.correlation,
            region_m: e.geometry.region_m,
            p_max: e.p_max,
            p_min_on: e.p_min_on,
            noise: e.noise,
            neighbors: e.neighbors,
            log_base: LogBaseKind::Two,
            episodes: t.episodes,
            slots_per_episode: t.slots_per_episode,
            eps_start: t.exploration.start,
            eps_end: t.exploration.end,
            anneal_steps: t.exploration.anneal_steps,
            train_every: t.train_every,
            reward_scale: t.reward_scale,
            eval_episodes: 5,
            eval_slots: 100,
            baselines: true,
            dqn: DqnSection::default(),
        }
    }
}

impl PowerSection {
    pub fn env(&self) -> PowerEnvConfig {
        PowerEnvConfig {
            n_links: self.n_links,
            geometry: InterferenceGeometry {
                correlation: self.correlation,
                region_m: self.region_m,
                ..InterferenceGeometry::default()
            },
            p_max: self.p_max,
            p_min_on: self.p_min_on,
            noise: self.noise,
            weights: Vec::new(),
            neighbors: self.neighbors,
            log_base: match self.log_base {
                LogBaseKind::Two => LogBase::Two,
                LogBaseKind::E => LogBase::E,
            },
        }
    }

    pub fn train(&self) -> PowerTrainConfig {
        PowerTrainConfig {
            episodes: self.episodes,
            slots_per_episode: self.slots_per_episode,
            dqn: self.dqn.apply(&PowerTrainConfig::default().dqn),
            exploration: ExplorationSchedule {
                start: self.eps_start,
                end: self.eps_end,
                anneal_steps: self.anneal_steps,
            },
            train_every: self.train_every,
            reward_scale: self.reward_scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum V2xMode {
    MarlFingerprint,
    SingleAgentTurnTaking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardModeKind {
    Weighted,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardSplitKind {
    Shared,
    PerLink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum V2xBaseline {
    Random,
    AlwaysOff,
    BestRbFullPower,
    OrthogonalFullPower,
    RandomRbFullPower,
}

impl V2xBaseline {
    pub fn name(self) -> &'static str {
        match self {
            V2xBaseline::Random => "random",
            V2xBaseline::AlwaysOff => "always_off",
            V2xBaseline::BestRbFullPower => "best_rb_full_power",
            V2xBaseline::OrthogonalFullPower => "orthogonal_full_power",
            V2xBaseline::RandomRbFullPower => "random_rb_full_power",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct V2xSection {
    pub mode: V2xMode,
    /// Defaults to on for MARL and off for turn-taking.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<bool>,
    pub episodes: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub anneal_fraction: f64,
    pub eval_episodes: usize,
    pub payload_bytes: f64,
    pub horizon: usize,
    pub m_v2i: usize,
    pub k_v2v: usize,
    pub n_vehicles: usize,
    pub neighbors: usize,
    pub v2v_ref_loss_db: f64,
    pub reward_mode: RewardModeKind,
    pub reward_split: RewardSplitKind,
    pub lambda_c: f64,
    pub lambda_v: f64,
    pub lambda_p: f64,
    /// Bits/s; omitted means twice the empirical rate bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub rate_scale: f64,
    pub stop_after_delivery: bool,
    pub baselines: Vec<V2xBaseline>,
    pub dqn: DqnSection,
}

impl Default for V2xSection {
    fn default() -> Self {
        let c = V2xConfig::desk();
        let t = V2xTrainConfig::default();
        Self {
            mode: V2xMode::MarlFingerprint,
            fingerprint: None,
            episodes: t.episodes,
            eps_start: t.eps_start,
            eps_end: t.eps_end,
            anneal_fraction: t.anneal_fraction,
            eval_episodes: 100,
            payload_bytes: c.payload_bytes,
            horizon: c.horizon,
            m_v2i: c.highway.m_v2i,
            k_v2v: c.highway.k_v2v,
            n_vehicles: c.highway.n_vehicles,
            neighbors: c.neighbors,
            v2v_ref_loss_db: c.channel.v2v.ref_loss_db,
            reward_mode: RewardModeKind::Beta,
            reward_split: RewardSplitKind::PerLink,
            lambda_c: c.reward.lambda_c,
            lambda_v: c.reward.lambda_v,
            lambda_p: c.reward.lambda_p,
            beta: c.reward.beta,
            rate_scale: c.reward.rate_scale,
            stop_after_delivery: c.stop_after_delivery,
            baselines: vec![V2xBaseline::Random],
            dqn: DqnSection::default(),
        }
    }
}

impl V2xSection {
    pub fn env(&self) -> V2xConfig {
        let mut c = V2xConfig::desk();
        c.payload_bytes = self.payload_bytes;
        c.horizon = self.horizon;
        c.highway.m_v2i = self.m_v2i;
        c.highway.k_v2v = self.k_v2v;
        c.highway.n_vehicles = self.n_vehicles;
        c.neighbors = self.neighbors;
        c.channel.v2v.ref_loss_db = self.v2v_ref_loss_db;
        c.reward.mode = match self.reward_mode {
            RewardModeKind::Weighted => RewardMode::Weighted,
            RewardModeKind::Beta => RewardMode::Beta,
        };
        c.reward.split = match self.reward_split {
            RewardSplitKind::Shared => RewardSplit::Shared,
            RewardSplitKind::PerLink => RewardSplit::PerLink,
        };
        c.reward.lambda_c = self.lambda_c;
        c.reward.lambda_v = self.lambda_v;
        c.reward.lambda_p = self.lambda_p;
        c.reward.beta = self.beta;
        c.reward.rate_scale = self.rate_scale;
        c.stop_after_delivery = self.stop_after_delivery;
        c
    }

    pub fn train_mode(&self) -> V2xTrainMode {
        match self.mode {
            V2xMode::MarlFingerprint => V2xTrainMode::MarlFingerprint,
            V2xMode::SingleAgentTurnTaking => V2xTrainMode::SingleAgentTurnTaking,
        }
    }

    pub fn train(&self) -> V2xTrainConfig {
        V2xTrainConfig {
            mode: self.train_mode(),
            episodes: self.episodes,
            dqn: self.dqn.apply(&V2xTrainConfig::default().dqn),
            eps_start: self.eps_start,
            eps_end: self.eps_end,
            anneal_fraction: self.anneal_fraction,
            fingerprint: self.fingerprint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupervisedSection {
    pub n_links: usize,
    pub p_max: f64,
    pub noise: f64,
    pub samples: usize,
    pub epochs: usize,
    pub val_fraction: f64,
    pub hidden: Vec<usize>,
    pub step_size: f64,
    pub batch_size: usize,
    pub eval_instances: usize,
}

impl Default for SupervisedSection {
    fn default() -> Self {
        let p = PowerProblem::default();
        let s = SupervisedConfig::default();
        Self {
            n_links: p.n_links,
            p_max: p.p_max,
            noise: p.noise,
            samples: 10_000,
            epochs: s.epochs,
            val_fraction: s.val_fraction,
            hidden: s.net.hidden,
            step_size: s.net.step_size,
            batch_size: s.net.batch_size,
            eval_instances: 1000,
        }
    }
}

fn problem(n_links: usize, p_max: f64, noise: f64) -> PowerProblem {
    PowerProblem {
        n_links,
        p_max,
        noise,
        ..PowerProblem::default()
    }
}

fn net(hidden: &[usize], step_size: f64, batch_size: usize) -> NetConfig {
    NetConfig {
        hidden: hidden.to_vec(),
        step_size,
        batch_size,
        ..NetConfig::default()
    }
}

impl SupervisedSection {
    pub fn problem(&self) -> PowerProblem {
        problem(self.n_links, self.p_max, self.noise)
    }

    pub fn supervised(&self) -> SupervisedConfig {
        SupervisedConfig {
            net: net(&self.hidden, self.step_size, self.batch_size),
            epochs: self.epochs,
            val_fraction: self.val_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    SpectralEfficiency,
    EnergyEfficiency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnsupervisedSection {
    pub n_links: usize,
    pub p_max: f64,
    pub noise: f64,
    pub steps: usize,
    pub objective: ObjectiveKind,
    /// Used by the energy-efficiency objective only.
    pub circuit_power: f64,
    pub hidden: Vec<usize>,
    pub step_size: f64,
    pub batch_size: usize,
    /// Training steps per logged loss window.
    pub log_every: usize,
    pub eval_instances: usize,
}

impl Default for UnsupervisedSection {
    fn default() -> Self {
        let p = PowerProblem::default();
        let u = UnsupervisedConfig::default();
        Self {
            n_links: p.n_links,
            p_max: p.p_max,
            noise: p.noise,
            steps: u.steps,
            objective: ObjectiveKind::SpectralEfficiency,
            circuit_power: 1.0,
            hidden: u.net.hidden,
            step_size: u.net.step_size,
            batch_size: u.net.batch_size,
            log_every: 100,
            eval_instances: 1000,
        }
    }
}

impl UnsupervisedSection {
    pub fn problem(&self) -> PowerProblem {
        problem(self.n_links, self.p_max, self.noise)
    }

    pub fn unsupervised(&self) -> UnsupervisedConfig {
        UnsupervisedConfig {
            net: net(&self.hidden, self.step_size, self.batch_size),
            steps: self.steps,
            objective: match self.objective {
                ObjectiveKind::SpectralEfficiency => PowerObjective::SpectralEfficiency,
                ObjectiveKind::EnergyEfficiency => PowerObjective::EnergyEfficiency {
                    circuit_power: self.circuit_power,
                },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsapSection {
    pub n: usize,
    pub samples: usize,
    pub epochs: usize,
    pub hidden: Vec<usize>,
    pub step_size: f64,
    pub batch_size: usize,
    pub eval_instances: usize,
}

impl Default for LsapSection {
    fn default() -> Self {
        let l = LsapConfig::default();
        Self {
            n: 4,
            samples: 50_000,
            epochs: l.epochs,
            hidden: l.net.hidden,
            step_size: l.net.step_size,
            batch_size: l.net.batch_size,
            eval_instances: 1000,
        }
    }
}

impl LsapSection {
    pub fn lsap(&self) -> LsapConfig {
        LsapConfig {
            net: net(&self.hidden, self.step_size, self.batch_size),
            epochs: self.epochs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainModelKind {
    /// Independent unit-mean exponential gains.
    Rayleigh,
    /// Random drop of links in a square region (the power-control channel).
    Geometry,
}

impl GainModelKind {
    pub fn model(self) -> GainModel {
        match self {
            GainModelKind::Rayleigh => GainModel::Rayleigh,
            GainModelKind::Geometry => GainModel::Geometry(InterferenceGeometry::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub n_links: usize,
    pub gains: GainModelKind,
    pub instances: usize,
    pub p_max: f64,
    pub noise: f64,
    /// Brute force searches `{0, p_max/(L-1), ..., p_max}^N`; 0 skips it.
    pub grid_levels: usize,
    pub tol: f64,
    pub max_iters: usize,
    /// WMMSE counts as near-optimal at this fraction of the brute-force value.
    pub quality: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            n_links: 3,
            gains: GainModelKind::Rayleigh,
            instances: 200,
            p_max: 1.0,
            noise: 0.1,
            grid_levels: 20,
            tol: 1e-9,
            max_iters: 1000,
            quality: 0.95,
        }
    }
}

fn default_replicas() -> usize {
    1
}

fn default_out() -> PathBuf {
    PathBuf::from("runs/latest")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kind: Kind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandit: Option<BanditSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tabular: Option<TabularSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsa_single: Option<DsaSingleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsa_coexist: Option<DsaCoexistSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsa_multi: Option<DsaMultiSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v2x: Option<V2xSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supervised: Option<SupervisedSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unsupervised: Option<UnsupervisedSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lsap: Option<LsapSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// Line of `key` inside `[section]` (or at top level for an empty section).
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[') {
            current = h.trim_end_matches(']').trim().to_string();
            if current == section {
                header_line = Some(i + 1);
            }
            continue;
        }
        if current == section {
            let k = line.split('=').next().unwrap_or("").trim();
            if k == key {
                return Some(i + 1);
            }
        }
    }
    header_line
}

impl RunConfig {
    pub fn new(kind: Kind) -> Self {
        Self {
            kind,
            seed: 0,
            replicas: 1,
            out: default_out(),
            bandit: None,
            tabular: None,
            dsa_single: None,
            dsa_coexist: None,
            dsa_multi: None,
            power: None,
            v2x: None,
            supervised: None,
            unsupervised: None,
            lsap: None,
            oracle: None,
        }
    }

    /// Parse and validate. Errors carry the 1-based line of the offending key.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let (line, col) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            HarnessError::Config {
                line,
                col,
                msg: e.message().to_string(),
            }
        })?;
        cfg.validate().map_err(|(section, key, msg)| HarnessError::Config {
            line: locate(text, section, key).unwrap_or(0),
            col: 0,
            msg,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            HarnessError::Config { line, col, msg } => HarnessError::ConfigFile {
                path: path.to_path_buf(),
                line,
                col,
                msg,
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    /// Copy with the active section and its DQN table fully written out.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        match c.kind {
            Kind::Bandit => {
                c.bandit.get_or_insert_with(Default::default);
            }
            Kind::Tabular => {
                c.tabular.get_or_insert_with(Default::default);
            }
            Kind::DsaSingle => {
                let s = c.dsa_single.get_or_insert_with(Default::default);
                s.dqn = DqnSection::full(&s.train().dqn);
            }
            Kind::DsaCoexist => {
                let s = c.dsa_coexist.get_or_insert_with(Default::default);
                s.dqn = DqnSection::full(&s.train().dqn);
            }
            Kind::DsaMulti => {
                let s = c.dsa_multi.get_or_insert_with(Default::default);
                s.dqn = DqnSection::full(&s.multi_user().dqn);
            }
            Kind::Power => {
                let s = c.power.get_or_insert_with(Default::default);
                s.dqn = DqnSection::full(&s.train().dqn);
            }
            Kind::V2x => {
                let s = c.v2x.get_or_insert_with(Default::default);
                s.dqn = DqnSection::full(&s.train().dqn);
                s.fingerprint = Some(s.train().uses_fingerprint());
            }
            Kind::Supervised => {
                c.supervised.get_or_insert_with(Default::default);
            }
            Kind::Unsupervised => {
                c.unsupervised.get_or_insert_with(Default::default);
            }
            Kind::Lsap => {
                c.lsap.get_or_insert_with(Default::default);
            }
            Kind::Oracle => {
                c.oracle.get_or_insert_with(Default::default);
            }
        }
        c
    }

    /// Override the evaluation length: episodes for V2X and power control,
    /// slots for spectrum access, instances for the learned optimizers.
    pub fn set_eval_length(&mut self, n: usize) {
        let mut r = self.resolved();
        match r.kind {
            Kind::Bandit => r.bandit.as_mut().expect("resolved").eval_steps = n as u64,
            Kind::Tabular => {}
            Kind::DsaSingle => r.dsa_single.as_mut().expect("resolved").eval_slots = n,
            Kind::DsaCoexist => r.dsa_coexist.as_mut().expect("resolved").eval_slots = n,
            Kind::DsaMulti => r.dsa_multi.as_mut().expect("resolved").eval_slots = n,
            Kind::Power => r.power.as_mut().expect("resolved").eval_episodes = n,
            Kind::V2x => r.v2x.as_mut().expect("resolved").eval_episodes = n,
            Kind::Supervised => r.supervised.as_mut().expect("resolved").eval_instances = n,
            Kind::Unsupervised => r.unsupervised.as_mut().expect("resolved").eval_instances = n,
            Kind::Lsap => r.lsap.as_mut().expect("resolved").eval_instances = n,
            Kind::Oracle => r.oracle.as_mut().expect("resolved").instances = n,
        }
        *self = r;
    }

    fn present_sections(&self) -> Vec<&'static str> {
        let mut s = Vec::new();
        let pairs: [(&'static str, bool); 11] = [
            ("bandit", self.bandit.is_some()),
            ("tabular", self.tabular.is_some()),
            ("dsa_single", self.dsa_single.is_some()),
            ("dsa_coexist", self.dsa_coexist.is_some()),
            ("dsa_multi", self.dsa_multi.is_some()),
            ("power", self.power.is_some()),
            ("v2x", self.v2x.is_some()),
            ("supervised", self.supervised.is_some()),
            ("unsupervised", self.unsupervised.is_some()),
            ("lsap", self.lsap.is_some()),
            ("oracle", self.oracle.is_some()),
        ];
        for (name, present) in pairs {
            if present {
                s.push(name);
            }
        }
        s
    }

    /// Semantic checks; the error names the section and key.
    pub fn validate(&self) -> Result<(), (&'static str, &'static str, String)> {
        let top = |key: &'static str, msg: String| ("", key, msg);
        if self.seed > i64::MAX as u64 {
            return Err(top("seed", format!("seed {} exceeds {}", self.seed, i64::MAX)));
        }
        if self.replicas == 0 {
            return Err(top("replicas", "replicas must be at least 1".into()));
        }
        for s in self.present_sections() {
            if s != self.kind.name() {
                return Err((s, "", format!("section [{s}] does not apply to kind {:?}", self.kind.name())));
            }
        }
        let r = self.resolved();
        let positive = |sec: &'static str, key: &'static str, v: usize| {
            if v == 0 {
                Err((sec, key, format!("{key} must be positive")))
            } else {
                Ok(())
            }
        };
        let prob = |sec: &'static str, key: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err((sec, key, format!("{key} = {v} is not a probability")))
            }
        };
        let core = |sec: &'static str, res: wra_core::Result<()>| res.map_err(|e| (sec, "", e.to_string()));
        match self.kind {
            Kind::Bandit => {
                let b = r.bandit.as_ref().expect("resolved");
                if b.arms.is_empty() {
                    return Err(("bandit", "arms", "need at least one arm".into()));
                }
                for &p in &b.arms {
                    prob("bandit", "arms", p)?;
                }
                prob("bandit", "epsilon", b.epsilon)?;
                positive("bandit", "log_every", b.log_every as usize)?;
            }
            Kind::Tabular => {
                let t = r.tabular.as_ref().expect("resolved");
                prob("tabular", "p_gg", t.p_gg)?;
                prob("tabular", "p_bb", t.p_bb)?;
                prob("tabular", "gamma", t.gamma)?;
                prob("tabular", "epsilon", t.epsilon)?;
                if !(0.5..=1.0).contains(&t.step_exponent) {
                    return Err(("tabular", "step_exponent", "step_exponent must lie in [0.5, 1]".into()));
                }
            }
            Kind::DsaSingle => {
                let s = r.dsa_single.as_ref().expect("resolved");
                positive("dsa_single", "channels", s.channels)?;
                positive("dsa_single", "history", s.history)?;
                positive("dsa_single", "eval_slots", s.eval_slots)?;
                prob("dsa_single", "p_gg", s.p_gg)?;
                prob("dsa_single", "p_bb", s.p_bb)?;
                core("dsa_single", s.train().dqn.validate())?;
            }
            Kind::DsaCoexist => {
                let s = r.dsa_coexist.as_ref().expect("resolved");
                prob("dsa_coexist", "aloha_p", s.aloha_p)?;
                positive("dsa_coexist", "history", s.history)?;
                positive("dsa_coexist", "eval_slots", s.eval_slots)?;
                core("dsa_coexist", s.train().dqn.validate())?;
            }
            Kind::DsaMulti => {
                let s = r.dsa_multi.as_ref().expect("resolved");
                positive("dsa_multi", "users", s.users)?;
                if s.capacities.is_empty() {
                    return Err(("dsa_multi", "capacities", "need at least one channel".into()));
                }
                positive("dsa_multi", "eval_slots", s.eval_slots)?;
                prob("dsa_multi", "alpha", s.alpha)?;
                prob("dsa_multi", "exec_alpha", s.exec_alpha)?;
                core("dsa_multi", s.multi_user().dqn.validate())?;
            }
            Kind::Power => {
                let s = r.power.as_ref().expect("resolved");
                core("power", s.env().validate())?;
                positive("power", "eval_episodes", s.eval_episodes)?;
                positive("power", "eval_slots", s.eval_slots)?;
                core("power", s.train().dqn.validate())?;
            }
            Kind::V2x => {
                let s = r.v2x.as_ref().expect("resolved");
                core("v2x", s.env().validate())?;
                positive("v2x", "episodes", s.episodes)?;
                positive("v2x", "eval_episodes", s.eval_episodes)?;
                core("v2x", s.train().dqn.validate())?;
            }
            Kind::Supervised => {
                let s = r.supervised.as_ref().expect("resolved");
                core("supervised", s.problem().validate())?;
                positive("supervised", "samples", s.samples)?;
                positive("supervised", "batch_size", s.batch_size)?;
                positive("supervised", "eval_instances", s.eval_instances)?;
            }
            Kind::Unsupervised => {
                let s = r.unsupervised.as_ref().expect("resolved");
                core("unsupervised", s.problem().validate())?;
                positive("unsupervised", "batch_size", s.batch_size)?;
                positive("unsupervised", "log_every", s.log_every)?;
                positive("unsupervised", "eval_instances", s.eval_instances)?;
            }
            Kind::Lsap => {
                let s = r.lsap.as_ref().expect("resolved");
                if s.n < 2 {
                    return Err(("lsap", "n", "n must be at least 2".into()));
                }
                positive("lsap", "samples", s.samples)?;
                positive("lsap", "batch_size", s.batch_size)?;
                positive("lsap", "eval_instances", s.eval_instances)?;
            }
            Kind::Oracle => {
                let s = r.oracle.as_ref().expect("resolved");
                positive("oracle", "n_links", s.n_links)?;
                positive("oracle", "instances", s.instances)?;
                if s.grid_levels == 1 {
                    return Err(("oracle", "grid_levels", "grid_levels must be 0 or at least 2".into()));
                }
                let cells = (s.grid_levels as f64).powi(s.n_links as i32);
                if cells > 1e8 {
                    return Err(("oracle", "grid_levels", format!("brute force over {cells:.0} grid points is too large")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_library() {
        let c = RunConfig::parse("kind = \"power\"").unwrap().resolved();
        let p = c.power.unwrap();
        assert_eq!(p.train(), PowerTrainConfig::default());
        assert_eq!(p.env(), PowerEnvConfig::default());
        let v = RunConfig::parse("kind = \"v2x\"").unwrap().resolved().v2x.unwrap();
        assert_eq!(v.env(), V2xConfig::desk());
    }

    #[test]
    fn partial_dqn_table_keeps_section_defaults() {
        let c = RunConfig::parse("kind = \"power\"\n[power.dqn]\ngamma = 0.5\n").unwrap();
        let d = c.resolved().power.unwrap().train().dqn;
        assert_eq!(d.gamma, 0.5);
        assert_eq!(d.hidden, PowerTrainConfig::default().dqn.hidden);
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = "kind = \"lsap\"\nseed = 3\n\n[lsap]\nn = 4\nepochz = 2\n";
        match RunConfig::parse(text) {
            Err(HarnessError::Config { line, msg, .. }) => {
                assert_eq!(line, 6);
                assert!(msg.contains("epochz"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_error_reports_its_line() {
        let text = "kind = \"bandit\"\n[bandit]\narms = [0.5]\nepsilon = 1.5\n";
        match RunConfig::parse(text) {
            Err(HarnessError::Config { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn foreign_section_is_rejected() {
        assert!(RunConfig::parse("kind = \"lsap\"\n[power]\nn_links = 2\n").is_err());
    }

    #[test]
    fn round_trip_every_kind() {
        for kind in [
            "bandit", "tabular", "dsa_single", "dsa_coexist", "dsa_multi", "power", "v2x", "supervised",
            "unsupervised", "lsap", "oracle",
        ] {
            let c = RunConfig::parse(&format!("kind = \"{kind}\"\nseed = 7\nreplicas = 2\n")).unwrap();
            let r = c.resolved();
            let text = r.to_toml();
            let back = RunConfig::parse(&text).unwrap();
            assert_eq!(back, r, "{kind}");
            assert_eq!(back.to_toml(), text);
            let unresolved = RunConfig::parse(&c.to_toml()).unwrap();
            assert_eq!(unresolved, c);
        }
    }

    #[test]
    fn seed_above_i64_is_rejected() {
        let mut c = RunConfig::new(Kind::Bandit);
        c.seed = u64::MAX;
        assert!(c.validate().is_err());
    }

    #[test]
    fn line_col_counts_from_one() {
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
        assert_eq!(line_col("ab", 0), (1, 1));
    }
}
