//! Channel and topology generators shared by every environment.

mod interference;
mod markov;
mod vehicular;

pub use interference::{evolve_fading, sample_interference_channel, FadingState, InterferenceGeometry};
pub use markov::{step_gilbert_elliott, ChannelCondition, GilbertElliott, RotatingChannel, SpectrumDynamics};
pub use vehicular::{
    compute_v2x_gains, init_vehicular_topology, step_mobility, HighwayConfig, PathlossModel,
    V2xChannelConfig, V2xGains, V2xLargeScale, Vehicle, VehicularTopology,
};

use crate::{Error, Result};

/// Square matrix of linear power gains; `get(j, i)` is the gain from the
/// transmitter of link `j` to the receiver of link `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    n: usize,
    data: Vec<f64>,
}

impl GainMatrix {
    /// Build from row-major data where row `j` holds the gains out of
    /// transmitter `j`. Entries must be finite and nonnegative and the
    /// diagonal strictly positive.
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.len() != n * n {
            return Err(Error::shape(format!(
                "gain matrix needs {}x{} entries, got {}",
                n,
                n,
                data.len()
            )));
        }
        if data.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::domain("gains must be finite and nonnegative"));
        }
        if (0..n).any(|i| data[i * n + i] <= 0.0) {
            return Err(Error::domain("direct-link gains must be positive"));
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.data[from * self.n + to]
    }

    pub fn direct(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Interference-plus-noise seen by receiver `i`.
    pub fn interference(&self, i: usize, powers: &[f64], noise: f64) -> f64 {
        noise
            + (0..self.n)
                .filter(|&j| j != i)
                .map(|j| powers[j] * self.get(j, i))
                .sum::<f64>()
    }

    pub fn sinr(&self, powers: &[f64], noise: f64) -> Vec<f64> {
        (0..self.n)
            .map(|i| powers[i] * self.direct(i) / self.interference(i, powers, noise))
            .collect()
    }

    /// Copy with every off-diagonal gain set to zero.
    pub fn without_cross_gains(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.n {
            data[i * self.n + i] = self.direct(i);
        }
        Self { n: self.n, data }
    }
}
