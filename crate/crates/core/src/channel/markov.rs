use rand::Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelCondition {
    Good,
    Bad,
}

/// Anything that decides, slot by slot, which channels are good.
pub trait SpectrumDynamics {
    fn n_channels(&self) -> usize;
    fn is_good(&self, channel: usize) -> bool;
    fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R);
}

/// Independent two-state Markov channels parameterized by stay probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct GilbertElliott {
    p_gg: Vec<f64>,
    p_bb: Vec<f64>,
    states: Vec<ChannelCondition>,
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::config(format!("stay probability {p} outside [0, 1]")))
    }
}

impl GilbertElliott {
    pub fn new(p_gg: Vec<f64>, p_bb: Vec<f64>, states: Vec<ChannelCondition>) -> Result<Self> {
        if p_gg.len() != states.len() || p_bb.len() != states.len() || states.is_empty() {
            return Err(Error::shape("per-channel vectors must share a nonzero length"));
        }
        for &p in p_gg.iter().chain(&p_bb) {
            check_probability(p)?;
        }
        Ok(Self { p_gg, p_bb, states })
    }

    /// Identical channels, initial states drawn from the stationary law.
    pub fn uniform<R: Rng + ?Sized>(n: usize, p_gg: f64, p_bb: f64, rng: &mut R) -> Result<Self> {
        check_probability(p_gg)?;
        check_probability(p_bb)?;
        let mut ch = Self::new(vec![p_gg; n], vec![p_bb; n], vec![ChannelCondition::Good; n])?;
        for c in 0..n {
            if !rng.random_bool(ch.stationary_good(c)) {
                ch.states[c] = ChannelCondition::Bad;
            }
        }
        Ok(ch)
    }

    pub fn states(&self) -> &[ChannelCondition] {
        &self.states
    }

    pub fn set_states(&mut self, states: &[ChannelCondition]) -> Result<()> {
        if states.len() != self.states.len() {
            return Err(Error::shape("state vector length mismatch"));
        }
        self.states.copy_from_slice(states);
        Ok(())
    }

    pub fn p_gg(&self, channel: usize) -> f64 {
        self.p_gg[channel]
    }

    pub fn p_bb(&self, channel: usize) -> f64 {
        self.p_bb[channel]
    }

    /// Long-run probability of the good state; 0.5 for a frozen chain.
    pub fn stationary_good(&self, channel: usize) -> f64 {
        let leave_good = 1.0 - self.p_gg[channel];
        let leave_bad = 1.0 - self.p_bb[channel];
        if leave_good + leave_bad == 0.0 {
            0.5
        } else {
            leave_bad / (leave_good + leave_bad)
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for c in 0..self.states.len() {
            let stay = match self.states[c] {
                ChannelCondition::Good => self.p_gg[c],
                ChannelCondition::Bad => self.p_bb[c],
            };
            // One draw per channel per slot keeps streams aligned across configs.
            let u: f64 = rng.random();
            if u >= stay {
                self.states[c] = match self.states[c] {
                    ChannelCondition::Good => ChannelCondition::Bad,
                    ChannelCondition::Bad => ChannelCondition::Good,
                };
            }
        }
    }
}

impl SpectrumDynamics for GilbertElliott {
    fn n_channels(&self) -> usize {
        self.states.len()
    }

    fn is_good(&self, channel: usize) -> bool {
        self.states[channel] == ChannelCondition::Good
    }

    fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.step(rng);
    }
}

/// Value-returning form of [`GilbertElliott::step`].
pub fn step_gilbert_elliott<R: Rng + ?Sized>(ch: &GilbertElliott, rng: &mut R) -> GilbertElliott {
    let mut next = ch.clone();
    next.step(rng);
    next
}

/// Exactly one good channel, moving to the next index every slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotatingChannel {
    n: usize,
    good: usize,
}

impl RotatingChannel {
    pub fn new(n: usize, start: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("need at least one channel"));
        }
        Ok(Self { n, good: start % n })
    }

    pub fn good_channel(&self) -> usize {
        self.good
    }
}

impl SpectrumDynamics for RotatingChannel {
    fn n_channels(&self) -> usize {
        self.n
    }

    fn is_good(&self, channel: usize) -> bool {
        channel == self.good
    }

    fn advance<R: Rng + ?Sized>(&mut self, _rng: &mut R) {
        self.good = (self.good + 1) % self.n;
    }
}
