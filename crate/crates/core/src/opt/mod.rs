//! Classical optimization baselines and exhaustive oracles.

mod hungarian;
mod mdp;
mod power;

pub use hungarian::{hungarian, Assignment};
pub use mdp::{evaluate_policy, value_iteration, TabularMdp, Transition};
pub use power::{brute_force_power, fp_power, wmmse_power, PowerSolution, BRUTE_FORCE_LIMIT};

use std::fmt::Write as _;

use crate::channel::GainMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Two,
    E,
}

impl LogBase {
    pub fn log1p(self, x: f64) -> f64 {
        match self {
            LogBase::Two => x.ln_1p() / std::f64::consts::LN_2,
            LogBase::E => x.ln_1p(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LogBase::Two => "log2",
            LogBase::E => "ln",
        }
    }
}

pub(crate) fn check_problem(gains: &GainMatrix, weights: &[f64], noise: f64) -> Result<()> {
    if weights.len() != gains.n() {
        return Err(Error::shape(format!(
            "{} weights for {} links",
            weights.len(),
            gains.n()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::domain("weights must be finite and nonnegative"));
    }
    if !(noise > 0.0 && noise.is_finite()) {
        return Err(Error::config(format!("noise power must be positive, got {noise}")));
    }
    Ok(())
}

/// Weighted sum of `log(1 + SINR_i)`.
pub fn sum_rate(gains: &GainMatrix, powers: &[f64], weights: &[f64], noise: f64, base: LogBase) -> Result<f64> {
    check_problem(gains, weights, noise)?;
    if powers.len() != gains.n() {
        return Err(Error::shape(format!("{} powers for {} links", powers.len(), gains.n())));
    }
    if powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::domain("powers must be finite and nonnegative"));
    }
    Ok(unchecked_sum_rate(gains, powers, weights, noise, base))
}

pub(crate) fn unchecked_sum_rate(gains: &GainMatrix, powers: &[f64], weights: &[f64], noise: f64, base: LogBase) -> f64 {
    (0..gains.n())
        .map(|i| {
            let sinr = powers[i] * gains.direct(i) / gains.interference(i, powers, noise);
            weights[i] * base.log1p(sinr)
        })
        .sum()
}

/// One row of an oracle comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRecord {
    pub instance_id: usize,
    pub method: String,
    pub objective: f64,
}

pub fn oracle_csv(records: &[OracleRecord]) -> String {
    let mut out = String::from("instance_id,method,objective\n");
    for r in records {
        let _ = writeln!(out, "{},{},{}", r.instance_id, r.method, r.objective);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_link() -> GainMatrix {
        GainMatrix::from_rows(2, vec![1.0, 0.5, 0.5, 1.0]).unwrap()
    }

    #[test]
    fn single_link_one_bit() {
        let g = GainMatrix::from_rows(1, vec![2.0]).unwrap();
        let r = sum_rate(&g, &[0.5], &[1.0], 1.0, LogBase::Two).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_power_zero_rate() {
        assert_eq!(sum_rate(&two_link(), &[0.0, 0.0], &[1.0, 1.0], 1.0, LogBase::Two).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_two_link() {
        let r = sum_rate(&two_link(), &[1.0, 1.0], &[1.0, 1.0], 1.0, LogBase::Two).unwrap();
        let expected = 2.0 * (1.0f64 + 1.0 / 1.5).log2();
        assert!((r - expected).abs() < 1e-14);
        let r = sum_rate(&two_link(), &[1.0, 1.0], &[1.0, 1.0], 1.0, LogBase::E).unwrap();
        assert!((r - 2.0 * (1.0f64 + 1.0 / 1.5).ln()).abs() < 1e-14);
    }

    #[test]
    fn errors() {
        let g = two_link();
        assert!(matches!(sum_rate(&g, &[-1.0, 1.0], &[1.0, 1.0], 1.0, LogBase::Two), Err(Error::Domain(_))));
        assert!(matches!(sum_rate(&g, &[1.0, 1.0], &[1.0, 1.0], 0.0, LogBase::Two), Err(Error::Config(_))));
        assert!(matches!(sum_rate(&g, &[1.0], &[1.0, 1.0], 1.0, LogBase::Two), Err(Error::Shape(_))));
    }

    #[test]
    fn csv_layout() {
        let csv = oracle_csv(&[OracleRecord {
            instance_id: 3,
            method: "wmmse".into(),
            objective: 1.5,
        }]);
        assert_eq!(csv, "instance_id,method,objective\n3,wmmse,1.5\n");
    }

    proptest! {
        #[test]
        fn monotone_in_gains(
            data in proptest::collection::vec(0.01f64..2.0, 9),
            powers in proptest::collection::vec(0.0f64..1.0, 3),
            link in 0usize..3,
            other in 0usize..3,
            bump in 1.01f64..3.0,
        ) {
            let g = GainMatrix::from_rows(3, data.clone()).unwrap();
            let w = [1.0, 1.0, 1.0];
            let base = sum_rate(&g, &powers, &w, 0.1, LogBase::Two).unwrap();
            let mut up = data.clone();
            up[link * 3 + link] *= bump;
            let r = sum_rate(&GainMatrix::from_rows(3, up).unwrap(), &powers, &w, 0.1, LogBase::Two).unwrap();
            prop_assert!(r >= base - 1e-12);
            if other != link {
                let mut cross = data;
                cross[other * 3 + link] *= bump;
                let r = sum_rate(&GainMatrix::from_rows(3, cross).unwrap(), &powers, &w, 0.1, LogBase::Two).unwrap();
                prop_assert!(r <= base + 1e-12);
            }
        }
    }
}
