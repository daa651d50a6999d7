//! Assignment by decomposition: one classifier per job predicts its worker
//! from the flattened cost matrix, and a greedy pass turns the per-job
//! scores into a valid permutation.

use super::dataset::{gen_lsap_dataset, sample_costs, LabeledDataset};
use super::fit::{epoch, shuffled, NetConfig};
use crate::nn::{evaluate_loss, LossSpec, MlpParams, OutputHead};
use crate::opt::{hungarian, Assignment};
use crate::rng::{derive_seed, seeded};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LsapConfig {
    pub net: NetConfig,
    pub epochs: usize,
}

impl Default for LsapConfig {
    fn default() -> Self {
        Self {
            net: NetConfig {
                hidden: vec![128, 64],
                ..NetConfig::default()
            },
            epochs: 20,
        }
    }
}

/// Classifier `j` maps the flattened costs to worker probabilities for job `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LsapModels {
    pub n: usize,
    pub models: Vec<MlpParams>,
}

/// Costs are centered before entering the classifiers.
fn lsap_input(flat_costs: &[f64]) -> Vec<f64> {
    flat_costs.iter().map(|c| c - 0.5).collect()
}

/// Train the `n` classifiers on a Hungarian-labeled dataset with a
/// cross-entropy loss. Classifier `j` is seeded from `derive_seed(seed, j)`.
pub fn train_lsap_classifiers(data: &LabeledDataset, cfg: &LsapConfig, seed: u64) -> Result<LsapModels> {
    data.validate()?;
    let n = data.label_width();
    if n < 2 || data.input_width() != n * n {
        return Err(Error::shape("dataset is not an n x n assignment dataset"));
    }
    let inputs: Vec<Vec<f64>> = data.inputs.iter().map(|x| lsap_input(x)).collect();
    let mut models = Vec::with_capacity(n);
    for job in 0..n {
        let targets: Vec<Vec<f64>> = data
            .labels
            .iter()
            .map(|l| {
                let mut t = vec![0.0; n];
                t[l[job] as usize] = 1.0;
                t
            })
            .collect();
        let (mut params, mut opt) = cfg.net.build(n * n, n, OutputHead::Softmax, derive_seed(seed, job as u64))?;
        let mut rng = seeded(derive_seed(seed, 1000 + job as u64));
        for _ in 0..cfg.epochs {
            let order = shuffled(inputs.len(), &mut rng);
            epoch(&mut params, &mut opt, &inputs, &order, cfg.net.batch_size, |i, y| {
                evaluate_loss(&LossSpec::CrossEntropy, y, Some(&targets[i]))
            })?;
        }
        models.push(params);
    }
    Ok(LsapModels { n, models })
}

/// Generate `n_samples` uniform-cost instances from `seed` and train on them.
pub fn lsap_train(n: usize, n_samples: usize, seed: u64, cfg: &LsapConfig) -> Result<LsapModels> {
    let data = gen_lsap_dataset(n, n_samples, seed)?;
    train_lsap_classifiers(&data, cfg, seed)
}

impl LsapModels {
    /// Per-job worker probabilities, `scores[job][worker]`.
    pub fn scores(&self, cost: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if cost.len() != self.n || cost.iter().any(|r| r.len() != self.n) {
            return Err(Error::shape(format!("expected a {0}x{0} cost matrix", self.n)));
        }
        let x = lsap_input(&cost.concat());
        self.models.iter().map(|m| m.predict(&x)).collect()
    }
}

/// Jobs in descending order of their top score (ties by index) each take
/// their best remaining worker (ties by index). Always a permutation.
pub fn greedy_assignment(scores: &[Vec<f64>]) -> Result<Assignment> {
    let n = scores.len();
    if scores.iter().any(|r| r.len() != n) {
        return Err(Error::shape("score matrix must be square"));
    }
    if scores.iter().flatten().any(|s| s.is_nan()) {
        return Err(Error::domain("scores must not be NaN"));
    }
    let top = |r: &Vec<f64>| r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut jobs: Vec<usize> = (0..n).collect();
    jobs.sort_by(|&a, &b| top(&scores[b]).total_cmp(&top(&scores[a])).then(a.cmp(&b)));
    let mut taken = vec![false; n];
    let mut perm = vec![0; n];
    for j in jobs {
        let w = (0..n)
            .filter(|&w| !taken[w])
            .fold(None, |best: Option<usize>, w| match best {
                Some(b) if scores[j][b] >= scores[j][w] => Some(b),
                _ => Some(w),
            })
            .expect("a free worker remains for every job");
        taken[w] = true;
        perm[j] = w;
    }
    Ok(Assignment { perm })
}

pub fn lsap_infer(models: &LsapModels, cost: &[Vec<f64>]) -> Result<Assignment> {
    greedy_assignment(&models.scores(cost)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsapEval {
    pub instances: usize,
    /// Fraction of jobs assigned the same worker as Hungarian.
    pub job_accuracy: f64,
    /// Fraction of instances matched exactly.
    pub perm_accuracy: f64,
    /// Mean cost of the inferred assignment over the optimal cost.
    pub cost_ratio: f64,
}

/// Compare inference with Hungarian on `count` fresh instances; instance
/// `i` uses cost stream `derive_seed(seed, i)`.
pub fn eval_lsap(models: &LsapModels, count: usize, seed: u64) -> Result<LsapEval> {
    if count == 0 {
        return Err(Error::config("no evaluation instances"));
    }
    let n = models.n;
    let (mut jobs, mut perms, mut inferred, mut optimal) = (0usize, 0usize, 0.0, 0.0);
    for i in 0..count {
        let cost = sample_costs(n, derive_seed(seed, i as u64));
        let (best, best_cost) = hungarian(&cost)?;
        let a = lsap_infer(models, &cost)?;
        let same = a.perm.iter().zip(&best.perm).filter(|(x, y)| x == y).count();
        jobs += same;
        perms += usize::from(same == n);
        inferred += a.cost(&cost);
        optimal += best_cost;
    }
    Ok(LsapEval {
        instances: count,
        job_accuracy: jobs as f64 / (count * n) as f64,
        perm_accuracy: perms as f64 / count as f64,
        cost_ratio: inferred / optimal,
    })
}
