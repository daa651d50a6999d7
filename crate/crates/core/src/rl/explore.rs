use rand::Rng;

use crate::{Error, Result};

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Greedy with probability `1 - eps`, uniform otherwise. No randomness is
/// consumed when `eps == 0`.
pub fn epsilon_greedy<R: Rng + ?Sized>(q_values: &[f64], eps: f64, rng: &mut R) -> usize {
    assert!(!q_values.is_empty(), "epsilon_greedy on an empty action set");
    if eps > 0.0 && rng.random::<f64>() < eps {
        rng.random_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

/// `(1 - alpha) softmax(beta q) + alpha / |A|` over every action.
pub fn boltzmann_mixture_probs(q_values: &[f64], alpha: f64, beta: f64) -> Result<Vec<f64>> {
    if q_values.is_empty() {
        return Err(Error::shape("empty action set"));
    }
    if !(0.0..=1.0).contains(&alpha) || !beta.is_finite() || q_values.iter().any(|q| !q.is_finite()) {
        return Err(Error::domain("invalid mixture weight, temperature or action values"));
    }
    let n = q_values.len() as f64;
    let m = q_values.iter().map(|q| beta * q).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = q_values.iter().map(|q| (beta * q - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.iter().map(|e| (1.0 - alpha) * e / z + alpha / n).collect())
}

pub fn boltzmann_mixture<R: Rng + ?Sized>(q_values: &[f64], alpha: f64, beta: f64, rng: &mut R) -> Result<usize> {
    let probs = boltzmann_mixture_probs(q_values, alpha, beta)?;
    Ok(sample_index(&probs, rng))
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left a sliver above the cumulative sum; take the last
    // action with positive mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Linear annealing from `start` to `end` over `anneal_steps`, then flat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplorationSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_steps: u64,
}

impl ExplorationSchedule {
    pub fn new(start: f64, end: f64, anneal_steps: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&end) {
            return Err(Error::config("exploration rates must lie in [0, 1]"));
        }
        Ok(Self {
            start,
            end,
            anneal_steps,
        })
    }

    pub fn constant(eps: f64) -> Result<Self> {
        Self::new(eps, eps, 0)
    }

    pub fn epsilon(&self, step: u64) -> f64 {
        if step >= self.anneal_steps {
            self.end
        } else {
            let frac = step as f64 / self.anneal_steps as f64;
            self.start + (self.end - self.start) * frac
        }
    }
}
