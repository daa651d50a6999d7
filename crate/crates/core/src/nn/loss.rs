use std::f64::consts::LN_2;

use crate::channel::GainMatrix;
use crate::{Error, Result};

/// Channel context needed to score a power vector.
#[derive(Debug, Clone, Copy)]
pub struct RateContext<'a> {
    /// `gains.get(k, i)` is the power gain from transmitter `k` to receiver `i`.
    pub gains: &'a GainMatrix,
    pub noise: f64,
    pub circuit_power: f64,
    pub p_max: f64,
}

#[derive(Debug, Clone, Copy)]
pub enum LossSpec<'a> {
    /// Mean squared error against a target vector.
    Mse,
    /// `-sum t log y` for a probability output `y`.
    CrossEntropy,
    /// Negative sum spectral efficiency of the powers in the output vector.
    NegSpectralEfficiency(RateContext<'a>),
    /// Negative sum of per-link spectral efficiency over consumed power.
    NegEnergyEfficiency(RateContext<'a>),
}

impl RateContext<'_> {
    fn validate(&self, n: usize) -> Result<()> {
        if !(self.noise > 0.0) {
            return Err(Error::config(format!("noise power must be positive, got {}", self.noise)));
        }
        if !(self.circuit_power >= 0.0) {
            return Err(Error::config("circuit power must be nonnegative"));
        }
        if self.gains.n() != n {
            return Err(Error::shape(format!(
                "{} powers for a {}-link gain matrix",
                n,
                self.gains.n()
            )));
        }
        Ok(())
    }

    /// Per-link `log2(1 + SINR)` and its Jacobian `d r_i / d P_j` (row `j`).
    fn rates_with_jacobian(&self, powers: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = powers.len();
        let g = self.gains;
        // total[i] = noise + sum_k g(k,i) P_k ; interference[i] excludes k = i.
        let total: Vec<f64> = (0..n)
            .map(|i| self.noise + (0..n).map(|k| g.get(k, i) * powers[k]).sum::<f64>())
            .collect();
        let interference: Vec<f64> = (0..n).map(|i| total[i] - g.get(i, i) * powers[i]).collect();
        let rates = (0..n)
            .map(|i| (g.get(i, i) * powers[i] / interference[i]).ln_1p() / LN_2)
            .collect();
        let jac = (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| {
                        let own = g.get(j, i) / total[i];
                        let cross = if i == j { 0.0 } else { g.get(j, i) / interference[i] };
                        (own - cross) / LN_2
                    })
                    .collect()
            })
            .collect();
        (rates, jac)
    }
}

/// Loss value and its gradient with respect to `output`.
pub fn evaluate_loss(spec: &LossSpec<'_>, output: &[f64], target: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
    match spec {
        LossSpec::Mse => {
            let t = require_target(output, target)?;
            let n = output.len() as f64;
            let value = output.iter().zip(t).map(|(y, t)| (y - t) * (y - t)).sum::<f64>() / n;
            let grad = output.iter().zip(t).map(|(y, t)| 2.0 * (y - t) / n).collect();
            Ok((value, grad))
        }
        LossSpec::CrossEntropy => {
            let t = require_target(output, target)?;
            let mut value = 0.0;
            let grad = output
                .iter()
                .zip(t)
                .map(|(&y, &ti)| {
                    let y = y.max(1e-300);
                    if ti != 0.0 {
                        value -= ti * y.ln();
                    }
                    -ti / y
                })
                .collect();
            Ok((value, grad))
        }
        LossSpec::NegSpectralEfficiency(ctx) => {
            ctx.validate(output.len())?;
            let (rates, jac) = ctx.rates_with_jacobian(output);
            let value = -rates.iter().sum::<f64>();
            let grad = jac.iter().map(|row| -row.iter().sum::<f64>()).collect();
            Ok((value, grad))
        }
        LossSpec::NegEnergyEfficiency(ctx) => {
            ctx.validate(output.len())?;
            let (rates, jac) = ctx.rates_with_jacobian(output);
            let denom: Vec<f64> = output.iter().map(|p| p + ctx.circuit_power).collect();
            let value = -rates.iter().zip(&denom).map(|(r, d)| r / d).sum::<f64>();
            let grad = (0..output.len())
                .map(|j| {
                    let through_rates: f64 = jac[j].iter().zip(&denom).map(|(dr, d)| dr / d).sum();
                    let own = rates[j] / (denom[j] * denom[j]);
                    -(through_rates - own)
                })
                .collect::<Vec<f64>>();
            if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(
                    "energy efficiency undefined at zero power with zero circuit power".into(),
                ));
            }
            Ok((value, grad))
        }
    }
}

fn require_target<'t>(output: &[f64], target: Option<&'t [f64]>) -> Result<&'t [f64]> {
    let t = target.ok_or_else(|| Error::config("this loss requires a target"))?;
    if t.len() != output.len() {
        return Err(Error::shape(format!(
            "target length {} differs from output length {}",
            t.len(),
            output.len()
        )));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(g: &GainMatrix, noise: f64, pc: f64) -> RateContext<'_> {
        RateContext {
            gains: g,
            noise,
            circuit_power: pc,
            p_max: 1.0,
        }
    }

    fn finite_diff(spec: &LossSpec<'_>, p: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..p.len())
            .map(|j| {
                let mut up = p.to_vec();
                let mut dn = p.to_vec();
                up[j] += h;
                dn[j] -= h;
                let fu = evaluate_loss(spec, &up, None).unwrap().0;
                let fd = evaluate_loss(spec, &dn, None).unwrap().0;
                (fu - fd) / (2.0 * h)
            })
            .collect()
    }

    fn random_gains(seed: u64) -> GainMatrix {
        use rand::Rng;
        let mut rng = crate::rng::seeded(seed);
        let data = (0..9).map(|_| rng.random_range(0.05..2.0)).collect();
        GainMatrix::from_rows(3, data).unwrap()
    }

    #[test]
    fn single_link_closed_form() {
        let g = GainMatrix::from_rows(1, vec![1.0]).unwrap();
        let (v, _) = evaluate_loss(&LossSpec::NegSpectralEfficiency(ctx(&g, 1.0, 0.0)), &[1.0], None).unwrap();
        assert!((v + 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_power_zero_rate() {
        let g = GainMatrix::from_rows(2, vec![1.0, 0.3, 0.2, 1.0]).unwrap();
        let (v, _) = evaluate_loss(&LossSpec::NegSpectralEfficiency(ctx(&g, 1.0, 0.0)), &[0.0, 0.0], None).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn rate_gradients_match_finite_differences() {
        for seed in 0..20 {
            let g = random_gains(seed);
            let p = [0.3, 0.8, 0.55];
            for spec in [
                LossSpec::NegSpectralEfficiency(ctx(&g, 0.5, 0.0)),
                LossSpec::NegEnergyEfficiency(ctx(&g, 0.5, 0.2)),
            ] {
                let (_, grad) = evaluate_loss(&spec, &p, None).unwrap();
                let fd = finite_diff(&spec, &p);
                for (a, n) in grad.iter().zip(&fd) {
                    let rel = (a - n).abs() / n.abs().max(1.0);
                    assert!(rel <= 1e-6, "seed {seed}: {a} vs {n}");
                }
            }
        }
    }

    #[test]
    fn nonpositive_noise_is_config_error() {
        let g = GainMatrix::from_rows(1, vec![1.0]).unwrap();
        let err = evaluate_loss(&LossSpec::NegSpectralEfficiency(ctx(&g, 0.0, 0.0)), &[1.0], None).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn mse_and_cross_entropy() {
        let (v, g) = evaluate_loss(&LossSpec::Mse, &[1.0, 3.0], Some(&[0.0, 1.0])).unwrap();
        assert_eq!(v, 2.5);
        assert_eq!(g, vec![1.0, 2.0]);
        let (v, _) = evaluate_loss(&LossSpec::CrossEntropy, &[0.25, 0.75], Some(&[0.0, 1.0])).unwrap();
        assert!((v + 0.75f64.ln()).abs() < 1e-15);
        assert!(evaluate_loss(&LossSpec::Mse, &[1.0], None).is_err());
    }
}
