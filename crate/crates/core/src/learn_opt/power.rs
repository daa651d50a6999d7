//! Learned power control: supervised imitation of WMMSE and unsupervised
//! training on the rate objective itself. Networks output powers normalized
//! by `P_max` through a sigmoid head.

use super::dataset::{LabeledDataset, PowerProblem};
use super::fit::{epoch, shuffled, NetConfig};
use crate::channel::GainMatrix;
use crate::nn::{evaluate_loss, LossSpec, MlpParams, OutputHead, RateContext};
use crate::opt::{sum_rate, wmmse_power, LogBase};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

const SPLIT_STREAM: u64 = 0x5EED_5911;

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedConfig {
    pub net: NetConfig,
    pub epochs: usize,
    /// Fraction of the dataset held out for validation.
    pub val_fraction: f64,
}

impl Default for SupervisedConfig {
    fn default() -> Self {
        Self {
            net: NetConfig {
                hidden: vec![128, 128],
                ..NetConfig::default()
            },
            epochs: 200,
            val_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedModel {
    pub params: MlpParams,
    /// Mean training MSE of every epoch.
    pub train_mse: Vec<f64>,
    pub val_mse: f64,
    pub n_train: usize,
    pub n_val: usize,
}

/// Deterministic train/validation split of `len` rows.
pub fn split_indices(len: usize, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::config(format!("validation fraction {val_fraction} outside [0, 1)")));
    }
    let mut idx = shuffled(len, &mut seeded(derive_seed(seed, SPLIT_STREAM)));
    let n_val = (len as f64 * val_fraction).round() as usize;
    let train = idx.split_off(n_val);
    Ok((train, idx))
}

/// Fit the dataset's labels with a mean squared error loss.
pub fn train_supervised(data: &LabeledDataset, cfg: &SupervisedConfig, seed: u64) -> Result<SupervisedModel> {
    data.validate()?;
    if data.is_empty() {
        return Err(Error::config("empty dataset"));
    }
    let (train, val) = split_indices(data.len(), cfg.val_fraction, seed)?;
    let (mut params, mut opt) = cfg.net.build(
        data.input_width(),
        data.label_width(),
        OutputHead::Sigmoid { scale: 1.0 },
        derive_seed(seed, 0),
    )?;
    let mut rng = seeded(derive_seed(seed, 1));
    let mut train_mse = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let order: Vec<usize> = shuffled(train.len(), &mut rng).into_iter().map(|k| train[k]).collect();
        let mse = epoch(&mut params, &mut opt, &data.inputs, &order, cfg.net.batch_size, |i, y| {
            evaluate_loss(&LossSpec::Mse, y, Some(&data.labels[i]))
        })?;
        train_mse.push(mse);
    }
    let val_mse = mean_mse(&params, data, &val)?;
    Ok(SupervisedModel {
        params,
        train_mse,
        val_mse,
        n_train: train.len(),
        n_val: val.len(),
    })
}

fn mean_mse(params: &MlpParams, data: &LabeledDataset, rows: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for &i in rows {
        total += evaluate_loss(&LossSpec::Mse, &params.predict(&data.inputs[i])?, Some(&data.labels[i]))?.0;
    }
    Ok(total / rows.len() as f64)
}

/// Powers from a network output, clamped into `[0, P_max]`.
pub fn model_powers(params: &MlpParams, problem: &PowerProblem, gains: &GainMatrix) -> Result<Vec<f64>> {
    Ok(params
        .predict(&problem.features(gains))?
        .iter()
        .map(|y| y.clamp(0.0, 1.0) * problem.p_max)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerModelEval {
    pub instances: usize,
    pub mean_model_rate: f64,
    pub mean_wmmse_rate: f64,
    /// `mean_model_rate / mean_wmmse_rate`.
    pub ratio: f64,
    /// Mean over instances of the per-instance ratio.
    pub mean_instance_ratio: f64,
}

/// Sum rate of the model's powers against WMMSE on the same instances.
pub fn eval_power_model(params: &MlpParams, problem: &PowerProblem, instances: &[GainMatrix]) -> Result<PowerModelEval> {
    if instances.is_empty() {
        return Err(Error::config("no evaluation instances"));
    }
    let w = vec![1.0; problem.n_links];
    let (mut model, mut wmmse, mut ratios) = (0.0, 0.0, 0.0);
    for g in instances {
        let r = sum_rate(g, &model_powers(params, problem, g)?, &w, problem.noise, LogBase::Two)?;
        let sol = wmmse_power(g, &w, problem.p_max, problem.noise, 1e-9, 1000)?;
        let rw = sum_rate(g, &sol.powers, &w, problem.noise, LogBase::Two)?;
        model += r;
        wmmse += rw;
        ratios += if rw > 0.0 { r / rw } else { 1.0 };
    }
    let n = instances.len() as f64;
    Ok(PowerModelEval {
        instances: instances.len(),
        mean_model_rate: model / n,
        mean_wmmse_rate: wmmse / n,
        ratio: model / wmmse,
        mean_instance_ratio: ratios / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerObjective {
    SpectralEfficiency,
    EnergyEfficiency { circuit_power: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnsupervisedConfig {
    pub net: NetConfig,
    pub steps: usize,
    pub objective: PowerObjective,
}

impl Default for UnsupervisedConfig {
    fn default() -> Self {
        Self {
            net: NetConfig::default(),
            steps: 5000,
            objective: PowerObjective::SpectralEfficiency,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnsupervisedModel {
    pub params: MlpParams,
    /// Mean minibatch loss of every step.
    pub loss_trace: Vec<f64>,
}

/// Minibatch descent on the negative objective of the powers the network
/// outputs. Every step draws a fresh batch; sample `k` of the run uses gain
/// stream `derive_seed(seed, k)`. No labels are involved.
pub fn train_unsupervised_power(problem: &PowerProblem, cfg: &UnsupervisedConfig, seed: u64) -> Result<UnsupervisedModel> {
    problem.validate()?;
    let n = problem.n_links;
    let (mut params, mut opt) = cfg.net.build(
        problem.input_width(),
        n,
        OutputHead::Sigmoid { scale: 1.0 },
        derive_seed(seed, u64::MAX),
    )?;
    let batch = cfg.net.batch_size;
    let mut loss_trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let gains: Vec<GainMatrix> = (0..batch)
            .map(|b| problem.sample(derive_seed(seed, (step * batch + b) as u64)))
            .collect::<Result<_>>()?;
        let inputs: Vec<Vec<f64>> = gains.iter().map(|g| problem.features(g)).collect();
        let order: Vec<usize> = (0..batch).collect();
        let loss = epoch(&mut params, &mut opt, &inputs, &order, batch, |i, y| {
            objective_loss(problem, cfg.objective, &gains[i], y)
        })?;
        loss_trace.push(loss);
    }
    Ok(UnsupervisedModel { params, loss_trace })
}

/// Negative objective of normalized powers `y` and its gradient in `y`.
pub fn objective_loss(problem: &PowerProblem, objective: PowerObjective, gains: &GainMatrix, y: &[f64]) -> Result<(f64, Vec<f64>)> {
    let powers: Vec<f64> = y.iter().map(|v| v * problem.p_max).collect();
    let ctx = |circuit_power| RateContext {
        gains,
        noise: problem.noise,
        circuit_power,
        p_max: problem.p_max,
    };
    let spec = match objective {
        PowerObjective::SpectralEfficiency => LossSpec::NegSpectralEfficiency(ctx(0.0)),
        PowerObjective::EnergyEfficiency { circuit_power } => LossSpec::NegEnergyEfficiency(ctx(circuit_power)),
    };
    let (value, grad) = evaluate_loss(&spec, &powers, None)?;
    Ok((value, grad.into_iter().map(|g| g * problem.p_max).collect()))
}

/// Fraction of consecutive `window`-step blocks whose mean loss is at most
/// the previous block's mean plus `rel_tol` of its magnitude.
pub fn window_trend(trace: &[f64], window: usize, rel_tol: f64) -> f64 {
    if window == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = trace
        .chunks_exact(window)
        .map(|c| c.iter().sum::<f64>() / window as f64)
        .collect();
    if means.len() < 2 {
        return 1.0;
    }
    let ok = means.windows(2).filter(|w| w[1] <= w[0] + rel_tol * w[0].abs()).count();
    ok as f64 / (means.len() - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn_opt::dataset::gen_power_dataset;

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let (a, b) = split_indices(100, 0.1, 3).unwrap();
        let (c, d) = split_indices(100, 0.1, 3).unwrap();
        assert_eq!((a.len(), b.len()), (90, 10));
        assert_eq!((&a, &b), (&c, &d));
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn memorizes_small_dataset() {
        let data = gen_power_dataset(&PowerProblem::default(), 10, 2).unwrap();
        let cfg = SupervisedConfig {
            net: NetConfig {
                hidden: vec![64],
                batch_size: 10,
                step_size: 3e-3,
                ..Default::default()
            },
            epochs: 3000,
            val_fraction: 0.0,
        };
        let m = train_supervised(&data, &cfg, 1).unwrap();
        assert!(*m.train_mse.last().unwrap() < 1e-4, "{:?}", m.train_mse.last());
    }

    #[test]
    fn objective_gradient_matches_finite_difference() {
        let p = PowerProblem::default();
        let g = p.sample(4).unwrap();
        let y = [0.3, 0.7, 0.5];
        for obj in [
            PowerObjective::SpectralEfficiency,
            PowerObjective::EnergyEfficiency { circuit_power: 0.2 },
        ] {
            let (_, grad) = objective_loss(&p, obj, &g, &y).unwrap();
            for j in 0..3 {
                let mut up = y;
                let mut dn = y;
                up[j] += 1e-6;
                dn[j] -= 1e-6;
                let fd = (objective_loss(&p, obj, &g, &up).unwrap().0 - objective_loss(&p, obj, &g, &dn).unwrap().0) / 2e-6;
                assert!((grad[j] - fd).abs() < 1e-6, "{obj:?} {j}: {} vs {fd}", grad[j]);
            }
        }
    }

    #[test]
    fn single_link_learns_full_power() {
        let p = PowerProblem {
            n_links: 1,
            ..Default::default()
        };
        let cfg = UnsupervisedConfig {
            net: NetConfig {
                hidden: vec![8],
                batch_size: 16,
                step_size: 1e-2,
                ..Default::default()
            },
            steps: 500,
            ..Default::default()
        };
        let m = train_unsupervised_power(&p, &cfg, 0).unwrap();
        for g in p.sample_many(50, 77).unwrap() {
            let pw = model_powers(&m.params, &p, &g).unwrap()[0];
            assert!(pw >= 0.98 * p.p_max, "{pw}");
        }
    }

    #[test]
    fn trend_counts_windows() {
        assert_eq!(window_trend(&[3.0, 3.0, 2.0, 2.0, 1.0, 1.0], 2, 0.0), 1.0);
        assert_eq!(window_trend(&[1.0, 1.0, 2.0, 2.0, 1.0, 1.0], 2, 0.0), 0.5);
        assert_eq!(window_trend(&[1.0], 2, 0.0), 1.0);
    }
}
