use std::collections::VecDeque;

use rand::Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Bounded FIFO memory with uniform sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
    pushes: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("replay capacity must be positive"));
        }
        Ok(Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            pushes: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total number of pushes, including evicted ones.
    pub fn pushes(&self) -> u64 {
        self.pushes
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
        self.pushes += 1;
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// `batch` uniform draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Experience>> {
        if self.items.len() < batch || self.items.is_empty() {
            return Err(Error::BufferUnderflow {
                available: self.items.len(),
                requested: batch,
            });
        }
        Ok((0..batch)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }
}

pub fn replay_push(buf: &mut ReplayBuffer, e: Experience) {
    buf.push(e);
}

pub fn replay_sample<'a, R: Rng + ?Sized>(buf: &'a ReplayBuffer, batch: usize, rng: &mut R) -> Result<Vec<&'a Experience>> {
    buf.sample(batch, rng)
}
