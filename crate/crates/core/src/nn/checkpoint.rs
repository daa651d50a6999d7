//! Text checkpoint format.
//!
//! ```text
//! MLPv1
//! <layer sizes, space separated>
//! <layer 0 weights, row-major>
//! <layer 0 biases>
//! ...
//! ```
//!
//! Every number is written with 17 significant digits so a save/load cycle is
//! bit-exact. The activation is not part of the file; the loader supplies it.

use std::fmt::Write as _;
use std::path::Path;

use super::{Activation, MlpParams};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "MLPv1";

/// Upper bound on parameters accepted by the parser.
const MAX_PARAMS: usize = 1 << 26;

/// Numeric content of a checkpoint file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCheckpoint {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

fn push_row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

/// Parse checkpoint text. Rejects wrong magic, malformed or non-finite
/// numbers, and token counts that disagree with the declared layer sizes.
pub fn parse_checkpoint(text: &str) -> Result<RawCheckpoint> {
    let mut lines = text.lines().enumerate();
    let (_, magic) = lines.next().ok_or_else(|| Error::parse(1, "empty checkpoint"))?;
    if magic.trim_end() != CHECKPOINT_MAGIC {
        return Err(Error::parse(1, format!("expected {CHECKPOINT_MAGIC:?} header")));
    }
    let (_, sizes_line) = lines
        .next()
        .ok_or_else(|| Error::parse(2, "missing layer sizes"))?;
    let layer_sizes = sizes_line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| Error::parse(2, format!("invalid layer size {tok:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(Error::parse(2, "need at least two positive layer sizes"));
    }
    let mut expected = 0usize;
    for pair in layer_sizes.windows(2) {
        let block = pair[0]
            .checked_mul(pair[1])
            .and_then(|w| w.checked_add(pair[1]))
            .ok_or_else(|| Error::parse(2, "layer sizes overflow"))?;
        expected = expected
            .checked_add(block)
            .filter(|&e| e <= MAX_PARAMS)
            .ok_or_else(|| Error::parse(2, "network too large"))?;
    }

    let mut tokens = Vec::new();
    for (idx, line) in lines {
        for tok in line.split_whitespace() {
            if tokens.len() == expected {
                return Err(Error::parse(idx + 1, "trailing data after last layer"));
            }
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(idx + 1, format!("invalid number {tok:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(idx + 1, "non-finite parameter"));
            }
            tokens.push(v);
        }
    }
    if tokens.len() != expected {
        return Err(Error::parse(
            text.lines().count(),
            format!("expected {expected} parameters, found {}", tokens.len()),
        ));
    }

    let mut it = tokens.into_iter();
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for pair in layer_sizes.windows(2) {
        weights.push(it.by_ref().take(pair[0] * pair[1]).collect());
        biases.push(it.by_ref().take(pair[1]).collect());
    }
    Ok(RawCheckpoint {
        layer_sizes,
        weights,
        biases,
    })
}

impl MlpParams {
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        out.push_str(CHECKPOINT_MAGIC);
        out.push('\n');
        let sizes: Vec<String> = self.layer_sizes.iter().map(usize::to_string).collect();
        out.push_str(&sizes.join(" "));
        out.push('\n');
        for (w, b) in self.weights.iter().zip(&self.biases) {
            push_row(&mut out, w);
            push_row(&mut out, b);
        }
        out
    }

    pub fn from_checkpoint(text: &str, activation: Activation) -> Result<Self> {
        let raw = parse_checkpoint(text)?;
        Self::from_parts(raw.layer_sizes, raw.weights, raw.biases, activation)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint())?;
        Ok(())
    }

    pub fn load(path: &Path, activation: Activation) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_checkpoint(&text, activation)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout() {
        let p = MlpParams::from_parts(
            vec![2, 1],
            vec![vec![0.5, -1.0]],
            vec![vec![0.25]],
            Activation::linear(),
        )
        .unwrap();
        let text = p.to_checkpoint();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "MLPv1");
        assert_eq!(lines[1], "2 1");
        assert_eq!(lines[2], "5.0000000000000000e-1 -1.0000000000000000e0");
        assert_eq!(lines[3], "2.5000000000000000e-1");
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_checkpoint("").is_err());
        assert!(parse_checkpoint("MLPv2\n1 1\n0\n0\n").is_err());
        assert!(parse_checkpoint("MLPv1\n1 1\n0\n").is_err());
        assert!(parse_checkpoint("MLPv1\n1 1\n0\n0\n0\n").is_err());
        assert!(parse_checkpoint("MLPv1\n1 1\nNaN\n0\n").is_err());
        assert!(parse_checkpoint("MLPv1\n1 0\n").is_err());
        assert!(parse_checkpoint("MLPv1\n99999999999 99999999999\n").is_err());
        assert!(parse_checkpoint("MLPv1\n1 1\n1.5\n-2\n").is_ok());
    }

    proptest! {
        #[test]
        fn save_load_is_bit_exact(seed in any::<u64>(), hidden in 1usize..6, scale in -20i32..20) {
            let mut p = MlpParams::init(&[3, hidden, 2], Activation::tanh(), seed).unwrap();
            for i in 0..p.param_count() {
                let v = p.param(i) * 10f64.powi(scale);
                p.set_param(i, v);
            }
            let back = MlpParams::from_checkpoint(&p.to_checkpoint(), Activation::tanh()).unwrap();
            for i in 0..p.param_count() {
                prop_assert_eq!(p.param(i).to_bits(), back.param(i).to_bits());
            }
        }
    }
}
