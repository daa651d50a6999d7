//! Learning-based wireless resource allocation.
//!
//! The crate is organized bottom-up:
//!
//! - [`nn`]: a small double-precision dense-network engine with exact
//!   backpropagation, first-order optimizers and rate-objective losses.
//! - [`channel`]: interference-channel fading, two-state Markov channels and a
//!   vehicular highway world.
//! - [`opt`]: classical baselines and brute-force oracles (sum rate, WMMSE,
//!   fractional programming, Hungarian, value iteration).
//! - [`rl`]: tabular Q-learning, DQN with replay and a target network,
//!   REINFORCE and one-step actor-critic.
//! - [`env`]: power control, dynamic spectrum access and V2X spectrum sharing
//!   environments together with their training loops.
//! - [`learn_opt`]: supervised and unsupervised learning of optimizer mappings
//!   and the decomposed assignment classifier.

pub mod channel;
pub mod env;
mod error;
pub mod learn_opt;
pub mod nn;
pub mod opt;
pub mod rl;
pub mod rng;

pub use error::{Error, Result};
