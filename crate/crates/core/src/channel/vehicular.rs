use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use std::fmt::Write as _;

use crate::rng::seeded;
use crate::{Error, Result};

/// Multi-lane ring-road segment with a fixed base station.
#[derive(Debug, Clone, PartialEq)]
pub struct HighwayConfig {
    pub segment_m: f64,
    pub lanes: usize,
    pub lane_width_m: f64,
    pub n_vehicles: usize,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    pub bs_position: (f64, f64),
    pub bs_height_m: f64,
    pub m_v2i: usize,
    pub k_v2v: usize,
}

impl Default for HighwayConfig {
    fn default() -> Self {
        Self {
            segment_m: 1000.0,
            lanes: 4,
            lane_width_m: 4.0,
            n_vehicles: 8,
            speed_min_mps: 10.0,
            speed_max_mps: 15.0,
            bs_position: (500.0, 35.0),
            bs_height_m: 25.0,
            m_v2i: 4,
            k_v2v: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vehicle {
    /// Position along the road at time zero.
    pub x0_m: f64,
    pub lane: usize,
    pub speed_mps: f64,
    /// +1 or -1; the lower half of the lanes drives towards +x.
    pub direction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicularTopology {
    segment_m: f64,
    lane_width_m: f64,
    vehicles: Vec<Vehicle>,
    elapsed_s: f64,
    bs_position: (f64, f64),
    bs_height_m: f64,
    v2v_pairs: Vec<(usize, usize)>,
    v2i_tx: Vec<usize>,
}

pub fn init_vehicular_topology(cfg: &HighwayConfig, seed: u64) -> Result<VehicularTopology> {
    if cfg.k_v2v == 0 || cfg.m_v2i == 0 {
        return Err(Error::config("need at least one V2V pair and one V2I link"));
    }
    if cfg.n_vehicles < 2 * cfg.k_v2v || cfg.n_vehicles < cfg.m_v2i {
        return Err(Error::config(format!(
            "{} vehicles cannot host {} V2V pairs and {} V2I links",
            cfg.n_vehicles, cfg.k_v2v, cfg.m_v2i
        )));
    }
    if !(cfg.segment_m > 0.0 && cfg.lanes > 0 && cfg.lane_width_m >= 0.0) {
        return Err(Error::config("invalid road geometry"));
    }
    if !(cfg.speed_min_mps >= 0.0 && cfg.speed_min_mps <= cfg.speed_max_mps) {
        return Err(Error::config("invalid speed range"));
    }
    let mut rng = seeded(seed);
    let vehicles: Vec<Vehicle> = (0..cfg.n_vehicles)
        .map(|i| {
            let lane = i % cfg.lanes;
            Vehicle {
                x0_m: rng.random_range(0.0..cfg.segment_m),
                lane,
                speed_mps: rng.random_range(cfg.speed_min_mps..=cfg.speed_max_mps),
                direction: if 2 * lane < cfg.lanes { 1.0 } else { -1.0 },
            }
        })
        .collect();
    let mut topo = VehicularTopology {
        segment_m: cfg.segment_m,
        lane_width_m: cfg.lane_width_m,
        vehicles,
        elapsed_s: 0.0,
        bs_position: cfg.bs_position,
        bs_height_m: cfg.bs_height_m,
        v2v_pairs: Vec::new(),
        v2i_tx: (cfg.n_vehicles - cfg.m_v2i..cfg.n_vehicles).collect(),
    };
    topo.v2v_pairs = (0..cfg.k_v2v)
        .map(|tx| {
            let rx = (0..cfg.n_vehicles)
                .filter(|&j| j != tx)
                .min_by(|&a, &b| topo.distance(tx, a).total_cmp(&topo.distance(tx, b)))
                .expect("at least two vehicles");
            (tx, rx)
        })
        .collect();
    Ok(topo)
}

/// Advance every vehicle by `dt` seconds of constant-speed motion.
pub fn step_mobility(topo: &VehicularTopology, dt: f64) -> VehicularTopology {
    let mut next = topo.clone();
    next.elapsed_s += dt;
    next
}

impl VehicularTopology {
    pub fn n_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn k_v2v(&self) -> usize {
        self.v2v_pairs.len()
    }

    pub fn m_v2i(&self) -> usize {
        self.v2i_tx.len()
    }

    /// (transmitter, receiver) vehicle indices of every V2V link.
    pub fn v2v_pairs(&self) -> &[(usize, usize)] {
        &self.v2v_pairs
    }

    pub fn v2i_transmitters(&self) -> &[usize] {
        &self.v2i_tx
    }

    pub fn elapsed_s(&self) -> f64 {
        self.elapsed_s
    }

    pub fn segment_m(&self) -> f64 {
        self.segment_m
    }

    pub fn position(&self, i: usize) -> (f64, f64) {
        let v = &self.vehicles[i];
        let x = (v.x0_m + v.direction * v.speed_mps * self.elapsed_s).rem_euclid(self.segment_m);
        (x, (v.lane as f64 + 0.5) * self.lane_width_m)
    }

    /// Distance between two vehicles, measured the short way around the ring.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (xa, ya) = self.position(a);
        let (xb, yb) = self.position(b);
        let dx = (xa - xb).abs();
        let dx = dx.min(self.segment_m - dx);
        (dx * dx + (ya - yb).powi(2)).sqrt()
    }

    pub fn distance_to_bs(&self, i: usize) -> f64 {
        let (x, y) = self.position(i);
        let (bx, by) = self.bs_position;
        ((x - bx).powi(2) + (y - by).powi(2) + self.bs_height_m.powi(2)).sqrt()
    }

    /// The `count` V2V transmitters closest to link `k`'s transmitter.
    pub fn nearest_v2v_transmitters(&self, k: usize, count: usize) -> Vec<usize> {
        let me = self.v2v_pairs[k].0;
        let mut others: Vec<usize> = (0..self.k_v2v()).filter(|&j| j != k).collect();
        others.sort_by(|&a, &b| {
            self.distance(me, self.v2v_pairs[a].0)
                .total_cmp(&self.distance(me, self.v2v_pairs[b].0))
                .then(a.cmp(&b))
        });
        others.truncate(count);
        others
    }

    /// Snapshot as CSV: `vehicle_id,x_m,y_m,lane,speed_mps`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("vehicle_id,x_m,y_m,lane,speed_mps\n");
        for (i, v) in self.vehicles.iter().enumerate() {
            let (x, y) = self.position(i);
            let _ = writeln!(out, "{i},{x},{y},{},{}", v.lane, v.speed_mps);
        }
        out
    }
}

/// `gain_dB = -(ref + 10 eta log10(max(d, floor))) + shadowing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathlossModel {
    pub ref_loss_db: f64,
    pub exponent: f64,
    pub shadowing_db: f64,
    pub min_distance_m: f64,
}

impl PathlossModel {
    pub fn gain(&self, distance_m: f64, shadow_db: f64) -> f64 {
        let d = distance_m.max(self.min_distance_m);
        let loss_db = self.ref_loss_db + 10.0 * self.exponent * d.log10();
        10f64.powf((shadow_db - loss_db) / 10.0)
    }

    fn draw<R: Rng + ?Sized>(&self, distance_m: f64, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.gain(distance_m, self.shadowing_db * z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct V2xChannelConfig {
    pub v2v: PathlossModel,
    pub v2i: PathlossModel,
}

impl Default for V2xChannelConfig {
    fn default() -> Self {
        Self {
            v2v: PathlossModel {
                ref_loss_db: 34.0,
                exponent: 3.0,
                shadowing_db: 3.0,
                min_distance_m: 1.0,
            },
            v2i: PathlossModel {
                ref_loss_db: 15.3,
                exponent: 3.76,
                shadowing_db: 8.0,
                min_distance_m: 1.0,
            },
        }
    }
}

/// Pathloss times shadowing for every link pair; refreshed with mobility.
#[derive(Debug, Clone, PartialEq)]
pub struct V2xLargeScale {
    pub m: usize,
    pub k: usize,
    /// `[k]` own V2V link.
    pub v2v_signal: Vec<f64>,
    /// `[k]` V2V transmitter to the base station.
    pub v2v_to_bs: Vec<f64>,
    /// `[m]` V2I transmitter to the base station.
    pub v2i_signal: Vec<f64>,
    /// `[m * k + j]` V2I transmitter `m` to V2V receiver `j`.
    pub v2i_to_v2v: Vec<f64>,
    /// `[from * k + to]` V2V transmitter to another V2V receiver; zero on the diagonal.
    pub v2v_cross: Vec<f64>,
}

impl V2xLargeScale {
    pub fn compute<R: Rng + ?Sized>(topo: &VehicularTopology, cfg: &V2xChannelConfig, rng: &mut R) -> Self {
        let (m, k) = (topo.m_v2i(), topo.k_v2v());
        let pairs = topo.v2v_pairs();
        let v2v_signal = pairs.iter().map(|&(t, r)| cfg.v2v.draw(topo.distance(t, r), rng)).collect();
        let v2v_to_bs = pairs
            .iter()
            .map(|&(t, _)| cfg.v2i.draw(topo.distance_to_bs(t), rng))
            .collect();
        let v2i_signal = topo
            .v2i_transmitters()
            .iter()
            .map(|&t| cfg.v2i.draw(topo.distance_to_bs(t), rng))
            .collect();
        let mut v2i_to_v2v = Vec::with_capacity(m * k);
        for &t in topo.v2i_transmitters() {
            for &(_, r) in pairs {
                v2i_to_v2v.push(cfg.v2v.draw(topo.distance(t, r), rng));
            }
        }
        let mut v2v_cross = Vec::with_capacity(k * k);
        for (a, &(t, _)) in pairs.iter().enumerate() {
            for (b, &(_, r)) in pairs.iter().enumerate() {
                v2v_cross.push(if a == b { 0.0 } else { cfg.v2v.draw(topo.distance(t, r), rng) });
            }
        }
        Self {
            m,
            k,
            v2v_signal,
            v2v_to_bs,
            v2i_signal,
            v2i_to_v2v,
            v2v_cross,
        }
    }
}

/// Instantaneous per-RB gains. The V2I link `m` occupies RB `m` only.
#[derive(Debug, Clone, PartialEq)]
pub struct V2xGains {
    pub m: usize,
    pub k: usize,
    /// `[k * m + rb]`
    pub v2v_signal: Vec<f64>,
    /// `[k * m + rb]`
    pub v2v_to_bs: Vec<f64>,
    /// `[m]`, on RB `m`.
    pub v2i_signal: Vec<f64>,
    /// `[m * k + j]`, on RB `m`.
    pub v2i_to_v2v: Vec<f64>,
    /// `[(from * k + to) * m + rb]`
    pub v2v_cross: Vec<f64>,
}

impl V2xGains {
    /// Multiply every large-scale term by an independent unit-mean
    /// exponential draw per RB.
    pub fn draw<R: Rng + ?Sized>(large: &V2xLargeScale, rng: &mut R) -> Self {
        let (m, k) = (large.m, large.k);
        let mut fade = |g: f64| -> f64 {
            let e: f64 = Exp1.sample(rng);
            g * e
        };
        let v2v_signal = (0..k * m)
            .map(|i| fade(large.v2v_signal[i / m]).max(f64::MIN_POSITIVE))
            .collect();
        let v2v_to_bs = (0..k * m).map(|i| fade(large.v2v_to_bs[i / m])).collect();
        let v2i_signal = large
            .v2i_signal
            .iter()
            .map(|&g| fade(g).max(f64::MIN_POSITIVE))
            .collect();
        let v2i_to_v2v = large.v2i_to_v2v.iter().map(|&g| fade(g)).collect();
        let v2v_cross = (0..k * k * m).map(|i| fade(large.v2v_cross[i / m])).collect();
        Self {
            m,
            k,
            v2v_signal,
            v2v_to_bs,
            v2i_signal,
            v2i_to_v2v,
            v2v_cross,
        }
    }

    /// Gains equal to the large-scale terms on every RB (no fading).
    pub fn unfaded(large: &V2xLargeScale) -> Self {
        let (m, k) = (large.m, large.k);
        Self {
            m,
            k,
            v2v_signal: (0..k * m).map(|i| large.v2v_signal[i / m]).collect(),
            v2v_to_bs: (0..k * m).map(|i| large.v2v_to_bs[i / m]).collect(),
            v2i_signal: large.v2i_signal.clone(),
            v2i_to_v2v: large.v2i_to_v2v.clone(),
            v2v_cross: (0..k * k * m).map(|i| large.v2v_cross[i / m]).collect(),
        }
    }

    pub fn v2v_signal(&self, k: usize, rb: usize) -> f64 {
        self.v2v_signal[k * self.m + rb]
    }

    pub fn v2v_to_bs(&self, k: usize, rb: usize) -> f64 {
        self.v2v_to_bs[k * self.m + rb]
    }

    pub fn v2i_signal(&self, m: usize) -> f64 {
        self.v2i_signal[m]
    }

    pub fn v2i_to_v2v(&self, m: usize, k: usize) -> f64 {
        self.v2i_to_v2v[m * self.k + k]
    }

    pub fn v2v_cross(&self, from: usize, to: usize, rb: usize) -> f64 {
        self.v2v_cross[(from * self.k + to) * self.m + rb]
    }
}

/// Large-scale terms plus one fading draw, both from `fading_seed`.
pub fn compute_v2x_gains(topo: &VehicularTopology, cfg: &V2xChannelConfig, fading_seed: u64) -> V2xGains {
    let mut rng = seeded(fading_seed);
    let large = V2xLargeScale::compute(topo, cfg, &mut rng);
    V2xGains::draw(&large, &mut rng)
}
