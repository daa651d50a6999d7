use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::GainMatrix;
use crate::rng::seeded;
use crate::{Error, Result};

/// Drop geometry and propagation constants for the interference channel.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceGeometry {
    /// Side of the square deployment region (m).
    pub region_m: f64,
    /// Transmitter-receiver distance range (m).
    pub min_pair_m: f64,
    pub max_pair_m: f64,
    /// Exponent in the pathloss `1 / (1 + d^eta)`.
    pub pathloss_exponent: f64,
    /// Log-normal shadowing standard deviation (dB).
    pub shadowing_db: f64,
    /// First-order autoregressive correlation of the small-scale amplitude.
    pub correlation: f64,
}

impl Default for InterferenceGeometry {
    fn default() -> Self {
        Self {
            region_m: 200.0,
            min_pair_m: 10.0,
            max_pair_m: 40.0,
            pathloss_exponent: 3.76,
            shadowing_db: 8.0,
            correlation: 0.9,
        }
    }
}

impl InterferenceGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.region_m > 0.0) {
            return Err(Error::config("region size must be positive"));
        }
        if !(self.min_pair_m >= 0.0 && self.min_pair_m <= self.max_pair_m) {
            return Err(Error::config(format!(
                "pair distance range [{}, {}] is empty",
                self.min_pair_m, self.max_pair_m
            )));
        }
        if self.min_pair_m > self.region_m {
            return Err(Error::config(format!(
                "minimum pair distance {} exceeds region {}",
                self.min_pair_m, self.region_m
            )));
        }
        if !(0.0..1.0).contains(&self.correlation) && self.correlation != 1.0 {
            return Err(Error::config("correlation must lie in [0, 1]"));
        }
        if !(self.shadowing_db >= 0.0 && self.pathloss_exponent > 0.0) {
            return Err(Error::config("invalid propagation constants"));
        }
        Ok(())
    }
}

/// Large-scale gains (fixed per episode) times a unit-mean Rayleigh power.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingState {
    n: usize,
    large_scale: Vec<f64>,
    re: Vec<f64>,
    im: Vec<f64>,
    correlation: f64,
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let x: f64 = StandardNormal.sample(rng);
    let y: f64 = StandardNormal.sample(rng);
    (x * FRAC_1_SQRT_2, y * FRAC_1_SQRT_2)
}

/// Drop `n` links in the square region and draw their gains.
pub fn sample_interference_channel(n: usize, geometry: &InterferenceGeometry, seed: u64) -> Result<FadingState> {
    if n == 0 {
        return Err(Error::config("need at least one link"));
    }
    geometry.validate()?;
    let mut rng = seeded(seed);
    let mut tx = Vec::with_capacity(n);
    let mut rx = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.random_range(0.0..=geometry.region_m);
        let y = rng.random_range(0.0..=geometry.region_m);
        let d = rng.random_range(geometry.min_pair_m..=geometry.max_pair_m);
        let theta = rng.random_range(0.0..2.0 * PI);
        tx.push((x, y));
        rx.push((x + d * theta.cos(), y + d * theta.sin()));
    }
    let mut large_scale = Vec::with_capacity(n * n);
    for t in &tx {
        for r in &rx {
            let d = ((t.0 - r.0).powi(2) + (t.1 - r.1).powi(2)).sqrt();
            let shadow: f64 = StandardNormal.sample(&mut rng);
            let pl = 1.0 / (1.0 + d.powf(geometry.pathloss_exponent));
            large_scale.push(pl * 10f64.powf(geometry.shadowing_db * shadow / 10.0));
        }
    }
    let (re, im) = (0..n * n).map(|_| complex_normal(&mut rng)).unzip();
    Ok(FadingState {
        n,
        large_scale,
        re,
        im,
        correlation: geometry.correlation,
    })
}

impl FadingState {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn correlation(&self) -> f64 {
        self.correlation
    }

    pub fn large_scale(&self) -> &[f64] {
        &self.large_scale
    }

    /// Small-scale power `|h|^2` of every (transmitter, receiver) entry.
    pub fn small_scale(&self) -> Vec<f64> {
        self.re.iter().zip(&self.im).map(|(a, b)| a * a + b * b).collect()
    }

    /// Complex small-scale amplitudes as (real, imaginary) slices.
    pub fn amplitudes(&self) -> (&[f64], &[f64]) {
        (&self.re, &self.im)
    }

    pub fn gains(&self) -> GainMatrix {
        let data: Vec<f64> = self
            .large_scale
            .iter()
            .zip(self.small_scale())
            .map(|(l, s)| l * s)
            .collect();
        // A Rayleigh draw of exactly zero on the diagonal has probability zero
        // but would break the positivity invariant.
        let n = self.n;
        let data = data
            .into_iter()
            .enumerate()
            .map(|(k, g)| if k / n == k % n { g.max(f64::MIN_POSITIVE) } else { g })
            .collect();
        GainMatrix { n, data }
    }

    /// Advance one slot: `h' = rho h + sqrt(1 - rho^2) e`, `e ~ CN(0, 1)`.
    pub fn evolve<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let rho = self.correlation;
        if rho == 1.0 {
            return;
        }
        let innov = (1.0 - rho * rho).sqrt();
        for k in 0..self.re.len() {
            let (er, ei) = complex_normal(rng);
            self.re[k] = rho * self.re[k] + innov * er;
            self.im[k] = rho * self.im[k] + innov * ei;
        }
    }

    /// Zero every off-diagonal large-scale gain (interference-free world).
    pub fn isolate_links(&mut self) {
        let n = self.n;
        for (k, g) in self.large_scale.iter_mut().enumerate() {
            if k / n != k % n {
                *g = 0.0;
            }
        }
    }
}

/// Value-returning form of [`FadingState::evolve`].
pub fn evolve_fading<R: Rng + ?Sized>(state: &FadingState, rng: &mut R) -> FadingState {
    let mut next = state.clone();
    next.evolve(rng);
    next
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometry(rho: f64) -> InterferenceGeometry {
        InterferenceGeometry {
            correlation: rho,
            ..Default::default()
        }
    }

    fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn single_link_positive_gain() {
        let s = sample_interference_channel(1, &geometry(0.5), 3).unwrap();
        let g = s.gains();
        assert_eq!(g.n(), 1);
        assert!(g.direct(0) > 0.0);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = sample_interference_channel(4, &geometry(0.5), 17).unwrap();
        let b = sample_interference_channel(4, &geometry(0.5), 17).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_geometry_rejected() {
        let g = InterferenceGeometry {
            region_m: 5.0,
            min_pair_m: 10.0,
            max_pair_m: 20.0,
            ..Default::default()
        };
        assert!(matches!(sample_interference_channel(2, &g, 0), Err(Error::Config(_))));
        assert!(sample_interference_channel(0, &geometry(0.1), 0).is_err());
    }

    #[test]
    fn initial_small_scale_has_unit_mean() {
        let mut total = 0.0;
        let mut count = 0.0;
        for seed in 0..10_000 {
            let s = sample_interference_channel(4, &geometry(0.0), seed).unwrap();
            total += s.small_scale().iter().sum::<f64>();
            count += 16.0;
        }
        let mean = total / count;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn unit_correlation_freezes_state() {
        let mut s = sample_interference_channel(3, &geometry(1.0), 1).unwrap();
        let before = s.clone();
        let mut rng = seeded(2);
        for _ in 0..10 {
            s.evolve(&mut rng);
        }
        assert_eq!(s, before);
    }

    fn lag_one(rho: f64) -> (f64, f64, f64) {
        let mut s = sample_interference_channel(1, &geometry(rho), 5).unwrap();
        let mut rng = seeded(6);
        let mut amp = Vec::new();
        let mut pow = Vec::new();
        for _ in 0..10_000 {
            amp.push(s.amplitudes().0[0]);
            pow.push(s.small_scale()[0]);
            s.evolve(&mut rng);
        }
        let mean_power = pow.iter().sum::<f64>() / pow.len() as f64;
        (
            correlation(&amp[..amp.len() - 1], &amp[1..]),
            correlation(&pow[..pow.len() - 1], &pow[1..]),
            mean_power,
        )
    }

    #[test]
    fn uncorrelated_fading() {
        let (a, p, _) = lag_one(0.0);
        assert!(a.abs() < 0.05 && p.abs() < 0.05, "{a} {p}");
    }

    #[test]
    fn correlated_fading_tracks_rho() {
        let (a, p, _) = lag_one(0.9);
        assert!((a - 0.9).abs() < 0.05, "amplitude {a}");
        assert!((p - 0.81).abs() < 0.05, "power {p}");
    }

    #[test]
    fn evolution_preserves_unit_mean_power() {
        let mut s = sample_interference_channel(4, &geometry(0.5), 8).unwrap();
        let mut rng = seeded(9);
        let mut total = 0.0;
        let steps = 20_000;
        for _ in 0..steps {
            s.evolve(&mut rng);
            total += s.small_scale().iter().sum::<f64>();
        }
        let mean = total / (steps as f64 * 16.0);
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn isolation_zeroes_cross_gains() {
        let mut s = sample_interference_channel(3, &geometry(0.5), 2).unwrap();
        s.isolate_links();
        let g = s.gains();
        assert_eq!(g.get(0, 1), 0.0);
        assert!(g.direct(2) > 0.0);
    }
}
