use super::epsilon_greedy;
use crate::opt::TabularMdp;
use crate::rng::seeded;
use crate::{Error, Result};

/// Dense `n_states x n_actions` action-value table.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::config("Q-table needs at least one state and one action"));
        }
        Ok(Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute difference to a reference table `reference[s][a]`.
    pub fn sup_distance(&self, reference: &[Vec<f64>]) -> f64 {
        (0..self.n_states)
            .flat_map(|s| (0..self.n_actions).map(move |a| (s, a)))
            .map(|(s, a)| (self.get(s, a) - reference[s][a]).abs())
            .fold(0.0, f64::max)
    }

    fn check(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.n_states {
            return Err(Error::Index {
                index: s,
                limit: self.n_states,
            });
        }
        if a >= self.n_actions {
            return Err(Error::Index {
                index: a,
                limit: self.n_actions,
            });
        }
        Ok(())
    }
}

/// One Q-learning backup. `next = None` marks a terminal transition.
pub fn q_update(
    q: &mut QTable,
    s: usize,
    a: usize,
    reward: f64,
    next: Option<usize>,
    alpha: f64,
    gamma: f64,
) -> Result<()> {
    q.check(s, a)?;
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&gamma) {
        return Err(Error::config("step size and discount must lie in [0, 1]"));
    }
    let bootstrap = match next {
        Some(n) => {
            q.check(n, 0)?;
            q.max(n)
        }
        None => 0.0,
    };
    let old = q.get(s, a);
    q.set(s, a, old + alpha * (reward + gamma * bootstrap - old));
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct QLearningConfig {
    pub steps: u64,
    pub gamma: f64,
    /// Behaviour policy exploration; Q-learning is off-policy.
    pub epsilon: f64,
    /// Step size of the `n`-th update of a pair is `n^-step_exponent`.
    pub step_exponent: f64,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        Self {
            steps: 200_000,
            gamma: 0.5,
            epsilon: 1.0,
            step_exponent: 0.9,
        }
    }
}

/// Q-learning on a single trajectory of `mdp` from state 0. Terminal states
/// restart the trajectory at state 0.
pub fn q_learning(mdp: &TabularMdp, cfg: &QLearningConfig, seed: u64) -> Result<QTable> {
    mdp.validate()?;
    if !(0.5..=1.0).contains(&cfg.step_exponent) {
        return Err(Error::config("step exponent must lie in [0.5, 1]"));
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut q = QTable::new(ns, na)?;
    let mut visits = vec![0u64; ns * na];
    let mut rng = seeded(seed);
    let mut s = 0;
    for _ in 0..cfg.steps {
        let a = epsilon_greedy(q.row(s), cfg.epsilon, &mut rng);
        let t = mdp.sample(s, a, &mut rng)?;
        visits[s * na + a] += 1;
        let alpha = (visits[s * na + a] as f64).powf(-cfg.step_exponent);
        let terminal = mdp.is_terminal(t.next);
        q_update(&mut q, s, a, t.reward, (!terminal).then_some(t.next), alpha, cfg.gamma)?;
        s = if terminal { 0 } else { t.next };
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_update_from_zero() {
        let mut q = QTable::new(2, 2).unwrap();
        q_update(&mut q, 0, 1, 1.0, Some(1), 1.0, 0.9).unwrap();
        assert_eq!(q.get(0, 1), 1.0);
    }

    #[test]
    fn zero_step_is_noop() {
        let mut q = QTable::new(2, 2).unwrap();
        q.set(1, 0, 3.0);
        let before = q.clone();
        q_update(&mut q, 0, 0, 5.0, Some(1), 0.0, 0.9).unwrap();
        assert_eq!(q, before);
    }

    #[test]
    fn bootstrap_and_terminal() {
        let mut q = QTable::new(2, 2).unwrap();
        q.set(1, 1, 2.0);
        q_update(&mut q, 0, 0, 1.0, Some(1), 0.5, 0.5).unwrap();
        assert_eq!(q.get(0, 0), 0.5 * (1.0 + 0.5 * 2.0));
        q_update(&mut q, 0, 1, 1.0, None, 1.0, 0.5).unwrap();
        assert_eq!(q.get(0, 1), 1.0);
    }

    #[test]
    fn index_errors() {
        let mut q = QTable::new(2, 2).unwrap();
        assert!(matches!(q_update(&mut q, 2, 0, 0.0, None, 0.1, 0.9), Err(Error::Index { .. })));
        assert!(matches!(q_update(&mut q, 0, 0, 0.0, Some(5), 0.1, 0.9), Err(Error::Index { .. })));
    }

    #[test]
    fn matches_value_iteration_on_channel_pair() {
        let mdp = crate::env::dsa::joint_channel_mdp(0.9, 0.9).unwrap();
        let q = q_learning(&mdp, &QLearningConfig::default(), 1).unwrap();
        let star = crate::opt::value_iteration(&mdp, 0.5, 1e-12).unwrap();
        let d = q.sup_distance(&star);
        assert!(d <= 0.05, "{d}");
    }
}
