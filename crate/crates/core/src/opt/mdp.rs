use rand::Rng;

use crate::{Error, Result};

/// One outcome of taking an action: `(next state, probability, reward)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next: usize,
    pub prob: f64,
    pub reward: f64,
}

/// Finite MDP with explicit outcome lists per (state, action). Terminal
/// states contribute no future value.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    outcomes: Vec<Vec<Transition>>,
    terminal: Vec<bool>,
}

impl TabularMdp {
    pub fn new(n_states: usize, n_actions: usize) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::config("MDP needs at least one state and one action"));
        }
        Ok(Self {
            n_states,
            n_actions,
            outcomes: vec![Vec::new(); n_states * n_actions],
            terminal: vec![false; n_states],
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn add(&mut self, state: usize, action: usize, next: usize, prob: f64, reward: f64) -> Result<()> {
        for (index, limit) in [(state, self.n_states), (action, self.n_actions), (next, self.n_states)] {
            if index >= limit {
                return Err(Error::Index { index, limit });
            }
        }
        if !(0.0..=1.0).contains(&prob) || !reward.is_finite() {
            return Err(Error::domain("probability outside [0, 1] or non-finite reward"));
        }
        self.outcomes[state * self.n_actions + action].push(Transition { next, prob, reward });
        Ok(())
    }

    pub fn set_terminal(&mut self, state: usize) {
        self.terminal[state] = true;
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminal[state]
    }

    pub fn outcomes(&self, state: usize, action: usize) -> &[Transition] {
        &self.outcomes[state * self.n_actions + action]
    }

    /// Draw one outcome of `(state, action)` by its probability.
    pub fn sample<R: Rng + ?Sized>(&self, state: usize, action: usize, rng: &mut R) -> Result<Transition> {
        if state >= self.n_states || action >= self.n_actions {
            return Err(Error::Index {
                index: state.max(action),
                limit: self.n_states.max(self.n_actions),
            });
        }
        let outs = self.outcomes(state, action);
        let last = *outs
            .last()
            .ok_or_else(|| Error::domain(format!("state {state} action {action} has no outcomes")))?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for t in outs {
            acc += t.prob;
            if u < acc {
                return Ok(*t);
            }
        }
        Ok(last)
    }

    /// Every non-terminal (state, action) must have outcome probabilities summing to one.
    pub fn validate(&self) -> Result<()> {
        for s in (0..self.n_states).filter(|&s| !self.terminal[s]) {
            for a in 0..self.n_actions {
                let total: f64 = self.outcomes(s, a).iter().map(|t| t.prob).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::domain(format!(
                        "outcomes of state {s} action {a} sum to {total}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn backup(&self, s: usize, a: usize, gamma: f64, v: &[f64]) -> f64 {
        self.outcomes(s, a)
            .iter()
            .map(|t| {
                let future = if self.terminal[t.next] { 0.0 } else { v[t.next] };
                t.prob * (t.reward + gamma * future)
            })
            .sum()
    }

    fn check_discount(&self, gamma: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::config(format!("discount {gamma} outside [0, 1]")));
        }
        if gamma >= 1.0 && !self.terminal.iter().any(|&t| t) {
            return Err(Error::config("undiscounted value iteration needs terminal states"));
        }
        self.validate()
    }
}

const MAX_SWEEPS: usize = 1_000_000;

/// Optimal action values, `q[s][a]`, to sup-norm tolerance `tol`.
pub fn value_iteration(mdp: &TabularMdp, gamma: f64, tol: f64) -> Result<Vec<Vec<f64>>> {
    mdp.check_discount(gamma)?;
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let mut v = vec![0.0; ns];
    let mut q = vec![vec![0.0; na]; ns];
    for _ in 0..MAX_SWEEPS {
        let mut change = 0.0f64;
        for s in 0..ns {
            for a in 0..na {
                let new = mdp.backup(s, a, gamma, &v);
                change = change.max((new - q[s][a]).abs());
                q[s][a] = new;
            }
        }
        for s in 0..ns {
            v[s] = q[s].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        if change <= tol * (1.0 - gamma).max(f64::EPSILON) {
            return Ok(q);
        }
    }
    Err(Error::Numeric("value iteration did not converge".into()))
}

/// State values of a deterministic policy.
pub fn evaluate_policy(mdp: &TabularMdp, policy: &[usize], gamma: f64, tol: f64) -> Result<Vec<f64>> {
    mdp.check_discount(gamma)?;
    if policy.len() != mdp.n_states {
        return Err(Error::shape("policy must name one action per state"));
    }
    if let Some(&a) = policy.iter().find(|&&a| a >= mdp.n_actions) {
        return Err(Error::Index {
            index: a,
            limit: mdp.n_actions,
        });
    }
    let mut v = vec![0.0; mdp.n_states];
    for _ in 0..MAX_SWEEPS {
        let mut change = 0.0f64;
        for s in 0..mdp.n_states {
            let new = mdp.backup(s, policy[s], gamma, &v);
            change = change.max((new - v[s]).abs());
            v[s] = new;
        }
        if change <= tol * (1.0 - gamma).max(f64::EPSILON) {
            return Ok(v);
        }
    }
    Err(Error::Numeric("policy evaluation did not converge".into()))
}
