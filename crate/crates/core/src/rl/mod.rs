//! Environment-agnostic reinforcement-learning machinery.

mod dqn;
mod explore;
mod log;
mod policy_gradient;
mod replay;
mod tabular;

pub use dqn::{dqn_loss, dqn_train_step, sync_target, DqnConfig, DqnLearner};
pub use explore::{boltzmann_mixture, boltzmann_mixture_probs, epsilon_greedy, argmax, ExplorationSchedule};
pub use log::{LogRow, TrainingLog};
pub use policy_gradient::{
    actor_critic_step, actor_update, critic_update, discounted_returns, reinforce_gradient, reinforce_update,
    sample_policy, ActorCriticTransition, EpisodeStep, MovingBaseline,
};
pub use replay::{replay_push, replay_sample, Experience, ReplayBuffer};
pub use tabular::{q_learning, q_update, QLearningConfig, QTable};
