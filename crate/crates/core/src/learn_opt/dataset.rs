//! Labeled datasets generated by running an optimizer, and their file format.
//!
//! ```text
//! WRADSv1
//! generator=<name>
//! seed=<u64>
//! config=<space separated key=value pairs>
//! dims=<samples> <input width> <label width>
//! data
//! <samples * (input width + label width) little-endian f64>
//! ```
//!
//! Each binary row is the input vector followed by the label vector.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use sha2::{Digest, Sha256};

use crate::channel::{sample_interference_channel, GainMatrix, InterferenceGeometry};
use crate::opt::{hungarian, wmmse_power};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

pub const DATASET_MAGIC: &str = "WRADSv1";

/// Upper bound on stored values accepted by the parser.
const MAX_VALUES: usize = 1 << 28;

/// WMMSE settings used for labels.
const WMMSE_TOL: f64 = 1e-9;
const WMMSE_MAX_ITER: usize = 1000;

/// Enough information to regenerate a dataset bit-identically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub generator: String,
    pub seed: u64,
    pub config: String,
}

/// Inputs and labels of equal count. Class labels are stored as integral
/// values.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

/// How channel gains are drawn.
#[derive(Debug, Clone, PartialEq)]
pub enum GainModel {
    /// Every gain is an independent unit-mean exponential (Rayleigh power).
    Rayleigh,
    /// Random drop in a square region with pathloss, shadowing and fading.
    Geometry(InterferenceGeometry),
}

/// A family of power-control instances.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProblem {
    pub n_links: usize,
    pub p_max: f64,
    pub noise: f64,
    pub gains: GainModel,
}

impl Default for PowerProblem {
    fn default() -> Self {
        Self {
            n_links: 3,
            p_max: 1.0,
            noise: 0.1,
            gains: GainModel::Rayleigh,
        }
    }
}

impl PowerProblem {
    pub fn validate(&self) -> Result<()> {
        if self.n_links == 0 {
            return Err(Error::config("need at least one link"));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(Error::config(format!("maximum power must be positive, got {}", self.p_max)));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(Error::config(format!("noise power must be positive, got {}", self.noise)));
        }
        if let GainModel::Geometry(g) = &self.gains {
            g.validate()?;
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.n_links * self.n_links
    }

    /// Instance drawn from stream `seed`.
    pub fn sample(&self, seed: u64) -> Result<GainMatrix> {
        let n = self.n_links;
        match &self.gains {
            GainModel::Rayleigh => {
                let mut rng = seeded(seed);
                let data = (0..n * n).map(|_| Exp1.sample(&mut rng)).collect();
                GainMatrix::from_rows(n, data)
            }
            GainModel::Geometry(g) => Ok(sample_interference_channel(n, g, seed)?.gains()),
        }
    }

    /// `count` instances; instance `i` uses stream `derive_seed(seed, i)`.
    pub fn sample_many(&self, count: usize, seed: u64) -> Result<Vec<GainMatrix>> {
        (0..count).map(|i| self.sample(derive_seed(seed, i as u64))).collect()
    }

    /// Network input: `log10(1 + g P_max / noise)` for every gain, row-major
    /// by transmitter.
    pub fn features(&self, gains: &GainMatrix) -> Vec<f64> {
        let snr = self.p_max / self.noise;
        gains.as_slice().iter().map(|g| (g * snr).ln_1p() / std::f64::consts::LN_10).collect()
    }

    pub fn describe(&self) -> String {
        let mut s = format!("n_links={} p_max={} noise={}", self.n_links, self.p_max, self.noise);
        match &self.gains {
            GainModel::Rayleigh => s.push_str(" gains=rayleigh"),
            GainModel::Geometry(g) => s.push_str(&format!(
                " gains=geometry region_m={} min_pair_m={} max_pair_m={} pathloss_exponent={} shadowing_db={} correlation={}",
                g.region_m, g.min_pair_m, g.max_pair_m, g.pathloss_exponent, g.shadowing_db, g.correlation
            )),
        }
        s
    }

    pub fn from_description(text: &str) -> Result<Self> {
        let kv = key_values(text)?;
        let num = |k: &str| -> Result<f64> {
            kv.get(k)
                .ok_or_else(|| Error::config(format!("missing {k}")))?
                .parse()
                .map_err(|_| Error::config(format!("invalid {k}")))
        };
        let gains = match kv.get("gains").map(String::as_str) {
            Some("rayleigh") => GainModel::Rayleigh,
            Some("geometry") => GainModel::Geometry(InterferenceGeometry {
                region_m: num("region_m")?,
                min_pair_m: num("min_pair_m")?,
                max_pair_m: num("max_pair_m")?,
                pathloss_exponent: num("pathloss_exponent")?,
                shadowing_db: num("shadowing_db")?,
                correlation: num("correlation")?,
            }),
            other => return Err(Error::config(format!("unknown gain model {other:?}"))),
        };
        let n_links = kv
            .get("n_links")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::config("missing or invalid n_links"))?;
        let p = Self {
            n_links,
            p_max: num("p_max")?,
            noise: num("noise")?,
            gains,
        };
        p.validate()?;
        Ok(p)
    }
}

fn key_values(text: &str) -> Result<BTreeMap<String, String>> {
    text.split_whitespace()
        .map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::config(format!("expected key=value, got {tok:?}")))
        })
        .collect()
}

/// WMMSE-labeled power dataset: inputs are [`PowerProblem::features`],
/// labels the WMMSE powers divided by `P_max`. Instances on which WMMSE
/// does not converge are rejected (logged) and the next stream is drawn.
pub fn gen_power_dataset(problem: &PowerProblem, n_samples: usize, seed: u64) -> Result<LabeledDataset> {
    problem.validate()?;
    if n_samples == 0 {
        return Err(Error::config("need at least one sample"));
    }
    let weights = vec![1.0; problem.n_links];
    let mut inputs = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    let mut rejected = 0usize;
    let mut candidate = 0u64;
    while inputs.len() < n_samples {
        if rejected > n_samples + 100 {
            return Err(Error::Numeric(format!("WMMSE failed to converge on {rejected} instances")));
        }
        let g = problem.sample(derive_seed(seed, candidate))?;
        candidate += 1;
        let sol = wmmse_power(&g, &weights, problem.p_max, problem.noise, WMMSE_TOL, WMMSE_MAX_ITER)?;
        if !sol.converged {
            rejected += 1;
            log::warn!("rejected instance {}: WMMSE did not converge", candidate - 1);
            continue;
        }
        inputs.push(problem.features(&g));
        labels.push(sol.powers.iter().map(|p| p / problem.p_max).collect());
    }
    Ok(LabeledDataset {
        inputs,
        labels,
        provenance: Provenance {
            generator: "wmmse".into(),
            seed,
            config: format!("{} n_samples={n_samples}", problem.describe()),
        },
    })
}

/// `n x n` costs uniform on `[0, 1)` from stream `seed`.
pub fn sample_costs(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded(seed);
    (0..n).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Hungarian-labeled assignment dataset: inputs are flattened cost matrices
/// (row = job), labels the optimal worker of every job.
pub fn gen_lsap_dataset(n: usize, n_samples: usize, seed: u64) -> Result<LabeledDataset> {
    if n < 2 {
        return Err(Error::config("assignment size must be at least 2"));
    }
    if n_samples == 0 {
        return Err(Error::config("need at least one sample"));
    }
    let mut inputs = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let cost = sample_costs(n, derive_seed(seed, i as u64));
        let (a, _) = hungarian(&cost)?;
        inputs.push(cost.concat());
        labels.push(a.perm.iter().map(|&w| w as f64).collect());
    }
    Ok(LabeledDataset {
        inputs,
        labels,
        provenance: Provenance {
            generator: "hungarian".into(),
            seed,
            config: format!("n={n} n_samples={n_samples}"),
        },
    })
}

/// Rebuild a dataset from its provenance alone.
pub fn regenerate(p: &Provenance) -> Result<LabeledDataset> {
    let kv = key_values(&p.config)?;
    let count = |k: &str| -> Result<usize> {
        kv.get(k)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::config(format!("missing or invalid {k}")))
    };
    match p.generator.as_str() {
        "wmmse" => gen_power_dataset(&PowerProblem::from_description(&p.config)?, count("n_samples")?, p.seed),
        "hungarian" => gen_lsap_dataset(count("n")?, count("n_samples")?, p.seed),
        other => Err(Error::config(format!("unknown generator {other:?}"))),
    }
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_width(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn label_width(&self) -> usize {
        self.labels.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.len() != self.labels.len() {
            return Err(Error::shape(format!(
                "{} inputs but {} labels",
                self.inputs.len(),
                self.labels.len()
            )));
        }
        let (wi, wl) = (self.input_width(), self.label_width());
        if self.inputs.iter().any(|x| x.len() != wi) || self.labels.iter().any(|y| y.len() != wl) {
            return Err(Error::shape("rows have inconsistent widths"));
        }
        let bad_text = |s: &str| s.contains('\n') || s.contains('\r');
        if bad_text(&self.provenance.generator) || bad_text(&self.provenance.config) {
            return Err(Error::config("provenance fields must be single-line"));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let p = &self.provenance;
        let header = format!(
            "{DATASET_MAGIC}\ngenerator={}\nseed={}\nconfig={}\ndims={} {} {}\ndata\n",
            p.generator,
            p.seed,
            p.config,
            self.len(),
            self.input_width(),
            self.label_width()
        );
        let mut out = header.into_bytes();
        out.reserve(self.len() * (self.input_width() + self.label_width()) * 8);
        for (x, y) in self.inputs.iter().zip(&self.labels) {
            for v in x.iter().chain(y) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Hex SHA-256 of the serialized file.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_bytes()?)))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        parse_dataset(&std::fs::read(path)?)
    }
}

/// Parse a dataset file. Header problems report their line; the binary
/// section must hold exactly the declared number of finite values.
pub fn parse_dataset(bytes: &[u8]) -> Result<LabeledDataset> {
    let mut pos = 0usize;
    let mut next_line = |line_no: usize| -> Result<&str> {
        let rest = &bytes[pos.min(bytes.len())..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse(line_no, "unterminated header line"))?;
        pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| Error::parse(line_no, "header is not UTF-8"))
    };
    if next_line(1)? != DATASET_MAGIC {
        return Err(Error::parse(1, format!("expected {DATASET_MAGIC:?} header")));
    }
    let field = |line: &str, line_no: usize, key: &str| -> Result<String> {
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| Error::parse(line_no, format!("expected {key}=...")))
    };
    let generator = field(next_line(2)?, 2, "generator")?;
    let seed = field(next_line(3)?, 3, "seed")?
        .parse::<u64>()
        .map_err(|_| Error::parse(3, "invalid seed"))?;
    let config = field(next_line(4)?, 4, "config")?;
    let dims: Vec<usize> = field(next_line(5)?, 5, "dims")?
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| Error::parse(5, format!("invalid dimension {t:?}"))))
        .collect::<Result<_>>()?;
    let &[count, wi, wl] = dims.as_slice() else {
        return Err(Error::parse(5, "dims needs three values"));
    };
    if next_line(6)? != "data" {
        return Err(Error::parse(6, "expected data marker"));
    }
    let row = wi
        .checked_add(wl)
        .filter(|&r| r > 0 || count == 0)
        .ok_or_else(|| Error::parse(5, "invalid row width"))?;
    let values = count
        .checked_mul(row)
        .filter(|&v| v <= MAX_VALUES)
        .ok_or_else(|| Error::parse(5, "dataset too large"))?;
    let body = &bytes[pos..];
    if body.len() != values * 8 {
        return Err(Error::parse(
            7,
            format!("expected {} data bytes, found {}", values * 8, body.len()),
        ));
    }
    let mut inputs = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for r in body.chunks_exact(row * 8).take(count) {
        let vals: Vec<f64> = r
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(7, "non-finite value in data"));
        }
        inputs.push(vals[..wi].to_vec());
        labels.push(vals[wi..].to_vec());
    }
    Ok(LabeledDataset {
        inputs,
        labels,
        provenance: Provenance { generator, seed, config },
    })
}
