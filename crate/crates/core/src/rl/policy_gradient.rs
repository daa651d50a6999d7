use super::explore::sample_index;
use crate::nn::{MlpParams, OptimizerState, OutputHead, ParamGrads};
use crate::{Error, Result};

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStep {
    pub state: Vec<f64>,
    pub action: usize,
    /// Reward received after taking `action`.
    pub reward: f64,
}

/// `G_t = sum_{u >= t} gamma^{u-t} R_{u+1}` for every t.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

fn require_softmax(policy: &MlpParams) -> Result<()> {
    if policy.activation().output != OutputHead::Softmax {
        return Err(Error::config("policy network needs a softmax head"));
    }
    Ok(())
}

/// Gradient of `-sum_t (G_t - b) log pi(A_t | S_t)` (a descent direction
/// for the optimizer) together with the start-state return.
pub fn reinforce_gradient(
    policy: &MlpParams,
    episode: &[EpisodeStep],
    gamma: f64,
    baseline: f64,
) -> Result<(ParamGrads, f64)> {
    require_softmax(policy)?;
    if episode.is_empty() {
        return Err(Error::config("empty episode"));
    }
    let rewards: Vec<f64> = episode.iter().map(|s| s.reward).collect();
    let returns = discounted_returns(&rewards, gamma);
    let mut grads = ParamGrads::zeros_like(policy);
    for (step, g) in episode.iter().zip(&returns) {
        let advantage = g - baseline;
        if advantage == 0.0 {
            continue;
        }
        add_log_prob_gradient(policy, &step.state, step.action, -advantage, &mut grads)?;
    }
    Ok((grads, returns[0]))
}

/// Adds `weight * d log pi(action | state) / d theta` into `grads`.
fn add_log_prob_gradient(
    policy: &MlpParams,
    state: &[f64],
    action: usize,
    weight: f64,
    grads: &mut ParamGrads,
) -> Result<()> {
    let trace = policy.forward(state)?;
    let probs = trace.output();
    if action >= probs.len() {
        return Err(Error::Index {
            index: action,
            limit: probs.len(),
        });
    }
    let mut out_grad = vec![0.0; probs.len()];
    out_grad[action] = weight / probs[action].max(1e-300);
    policy.backward_into(&trace, &out_grad, grads)
}

/// One REINFORCE update; returns the start-state return of the episode.
pub fn reinforce_update(
    policy: &mut MlpParams,
    episode: &[EpisodeStep],
    gamma: f64,
    opt: &mut OptimizerState,
    baseline: Option<f64>,
) -> Result<f64> {
    let (grads, j) = reinforce_gradient(policy, episode, gamma, baseline.unwrap_or(0.0))?;
    opt.apply(policy, &grads)?;
    Ok(j)
}

/// Exponential moving average of episode returns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingBaseline {
    value: f64,
    rate: f64,
    seen: bool,
}

impl MovingBaseline {
    pub fn new(rate: f64) -> Self {
        Self {
            value: 0.0,
            rate,
            seen: false,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn update(&mut self, ret: f64) {
        if self.seen {
            self.value += self.rate * (ret - self.value);
        } else {
            self.value = ret;
            self.seen = true;
        }
    }
}

/// `(S, A, R, S', A')`; `next_action` is ignored for terminal transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCriticTransition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub next_action: usize,
    pub terminal: bool,
}

/// Regress `Q_w(s, a)` toward `r + gamma Q_w(s', a')`; returns the TD error.
pub fn critic_update(critic: &mut MlpParams, t: &ActorCriticTransition, gamma: f64, opt: &mut OptimizerState) -> Result<f64> {
    let target = if t.terminal {
        t.reward
    } else {
        t.reward + gamma * critic.predict(&t.next_state)?[t.next_action]
    };
    let trace = critic.forward(&t.state)?;
    let q = trace.output()[t.action];
    let mut out_grad = vec![0.0; trace.output().len()];
    out_grad[t.action] = 2.0 * (q - target);
    let grads = critic.backward(&trace, &out_grad)?;
    opt.apply(critic, &grads)?;
    Ok(target - q)
}

/// Ascend `grad log pi(a | s) * q_sa`.
pub fn actor_update(actor: &mut MlpParams, state: &[f64], action: usize, q_sa: f64, opt: &mut OptimizerState) -> Result<()> {
    require_softmax(actor)?;
    let mut grads = ParamGrads::zeros_like(actor);
    if q_sa != 0.0 {
        add_log_prob_gradient(actor, state, action, -q_sa, &mut grads)?;
    }
    opt.apply(actor, &grads)
}

/// Actor step using the critic's current estimate, then a critic step.
/// Returns the TD error.
pub fn actor_critic_step(
    actor: &mut MlpParams,
    critic: &mut MlpParams,
    t: &ActorCriticTransition,
    gamma: f64,
    actor_opt: &mut OptimizerState,
    critic_opt: &mut OptimizerState,
) -> Result<f64> {
    let q_sa = critic.predict(&t.state)?[t.action];
    actor_update(actor, &t.state, t.action, q_sa, actor_opt)?;
    critic_update(critic, t, gamma, critic_opt)
}

/// Sample an action from a softmax policy network.
pub fn sample_policy<R: Rng + ?Sized>(policy: &MlpParams, state: &[f64], rng: &mut R) -> Result<usize> {
    Ok(sample_index(&policy.predict(state)?, rng))
}
