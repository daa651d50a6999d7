use rand::Rng;

use super::explore::{argmax, epsilon_greedy};
use super::replay::{Experience, ReplayBuffer};
use crate::nn::{Activation, MlpParams, OptimizerKind, OptimizerState, ParamGrads};
use crate::{Error, Result};

/// Deep copy of the online parameters.
pub fn sync_target(theta: &MlpParams) -> MlpParams {
    theta.clone()
}

/// Sum-squared Bellman error over `batch` and its gradient with respect to
/// the online parameters. Only the taken action's output carries gradient.
pub fn dqn_loss(
    theta: &MlpParams,
    target: &MlpParams,
    batch: &[&Experience],
    gamma: f64,
    double_q: bool,
) -> Result<(f64, ParamGrads)> {
    let mut grads = ParamGrads::zeros_like(theta);
    let mut loss = 0.0;
    let n_out = theta.output_width();
    for e in batch {
        if e.action >= n_out {
            return Err(Error::Index {
                index: e.action,
                limit: n_out,
            });
        }
        let y = if e.terminal {
            e.reward
        } else {
            let next_target = target.predict(&e.next_state)?;
            let bootstrap = if double_q {
                next_target[argmax(&theta.predict(&e.next_state)?)]
            } else {
                next_target.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            e.reward + gamma * bootstrap
        };
        let trace = theta.forward(&e.state)?;
        let q = trace.output()[e.action];
        loss += (y - q) * (y - q);
        let mut out_grad = vec![0.0; n_out];
        out_grad[e.action] = 2.0 * (q - y);
        theta.backward_into(&trace, &out_grad, &mut grads)?;
    }
    Ok((loss, grads))
}

/// Sample a minibatch and take one optimizer step on `theta`.
#[allow(clippy::too_many_arguments)]
pub fn dqn_train_step<R: Rng + ?Sized>(
    theta: &mut MlpParams,
    target: &MlpParams,
    buf: &ReplayBuffer,
    batch: usize,
    gamma: f64,
    opt: &mut OptimizerState,
    double_q: bool,
    rng: &mut R,
) -> Result<f64> {
    let sample = buf.sample(batch, rng)?;
    let (loss, grads) = dqn_loss(theta, target, &sample, gamma, double_q)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("DQN loss diverged ({loss})")));
    }
    opt.apply(theta, &grads)?;
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Training steps between target synchronizations.
    pub target_sync: u64,
    pub double_q: bool,
    pub optimizer: OptimizerKind,
    pub step_size: f64,
    /// Experiences required before the first gradient step.
    pub warmup: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            gamma: 0.9,
            batch_size: 32,
            replay_capacity: 10_000,
            target_sync: 100,
            double_q: false,
            optimizer: OptimizerKind::Adam,
            step_size: 1e-3,
            warmup: 256,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(format!("discount {} outside [0, 1]", self.gamma)));
        }
        if self.batch_size == 0 || self.target_sync == 0 {
            return Err(Error::config("batch size and target sync period must be positive"));
        }
        if self.warmup > self.replay_capacity {
            return Err(Error::config("warmup exceeds replay capacity"));
        }
        Ok(())
    }
}

/// Online network, target copy, optimizer and replay memory of one learner.
#[derive(Debug, Clone)]
pub struct DqnLearner {
    pub online: MlpParams,
    pub target: MlpParams,
    pub opt: OptimizerState,
    pub replay: ReplayBuffer,
    cfg: DqnConfig,
    train_steps: u64,
    syncs: u64,
}

impl DqnLearner {
    pub fn new(input: usize, n_actions: usize, cfg: DqnConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut sizes = vec![input];
        sizes.extend(&cfg.hidden);
        sizes.push(n_actions);
        let online = MlpParams::init(&sizes, Activation::relu(), seed)?;
        Self::from_params(online, cfg)
    }

    pub fn from_params(online: MlpParams, cfg: DqnConfig) -> Result<Self> {
        cfg.validate()?;
        let opt = OptimizerState::new(cfg.optimizer, cfg.step_size, &online)?;
        let replay = ReplayBuffer::new(cfg.replay_capacity)?;
        Ok(Self {
            target: sync_target(&online),
            online,
            opt,
            replay,
            cfg,
            train_steps: 0,
            syncs: 0,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.cfg
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn syncs(&self) -> u64 {
        self.syncs
    }

    pub fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.online.predict(obs)
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], eps: f64, rng: &mut R) -> Result<usize> {
        Ok(epsilon_greedy(&self.q_values(obs)?, eps, rng))
    }

    pub fn remember(&mut self, e: Experience) {
        self.replay.push(e);
    }

    /// One gradient step once warm-up is over; syncs the target every
    /// `target_sync` steps.
    pub fn train<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<f64>> {
        if self.replay.len() < self.cfg.warmup.max(self.cfg.batch_size) {
            return Ok(None);
        }
        let loss = dqn_train_step(
            &mut self.online,
            &self.target,
            &self.replay,
            self.cfg.batch_size,
            self.cfg.gamma,
            &mut self.opt,
            self.cfg.double_q,
            rng,
        )?;
        self.train_steps += 1;
        if self.train_steps % self.cfg.target_sync == 0 {
            self.target = sync_target(&self.online);
            self.syncs += 1;
        }
        Ok(Some(loss))
    }
}
