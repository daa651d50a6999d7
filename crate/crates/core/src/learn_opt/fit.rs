use rand::seq::SliceRandom;

use crate::nn::{Activation, Hidden, MlpParams, OptimizerKind, OptimizerState, OutputHead, ParamGrads};
use crate::rng::SimRng;
use crate::{Error, Result};

/// Shape and optimizer settings shared by the learned-optimizer pipelines.
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
    pub hidden_activation: Hidden,
    pub optimizer: OptimizerKind,
    pub step_size: f64,
    pub batch_size: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            hidden_activation: Hidden::Relu,
            optimizer: OptimizerKind::Adam,
            step_size: 1e-3,
            batch_size: 64,
        }
    }
}

impl NetConfig {
    pub(crate) fn build(&self, n_in: usize, n_out: usize, head: OutputHead, seed: u64) -> Result<(MlpParams, OptimizerState)> {
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        let mut sizes = vec![n_in];
        sizes.extend(&self.hidden);
        sizes.push(n_out);
        let params = MlpParams::init(&sizes, Activation::new(self.hidden_activation, head), seed)?;
        let opt = OptimizerState::new(self.optimizer, self.step_size, &params)?;
        Ok((params, opt))
    }
}

/// One pass over `order` in minibatches. `loss` maps (sample, output) to a
/// loss value and its output gradient. Returns the mean loss.
pub(crate) fn epoch<F>(
    params: &mut MlpParams,
    opt: &mut OptimizerState,
    inputs: &[Vec<f64>],
    order: &[usize],
    batch_size: usize,
    mut loss: F,
) -> Result<f64>
where
    F: FnMut(usize, &[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut grads = ParamGrads::zeros_like(params);
    let mut total = 0.0;
    for batch in order.chunks(batch_size) {
        grads.fill_zero();
        for &i in batch {
            let trace = params.forward(&inputs[i])?;
            let (value, g) = loss(i, trace.output())?;
            total += value;
            params.backward_into(&trace, &g, &mut grads)?;
        }
        grads.scale(1.0 / batch.len() as f64);
        opt.apply(params, &grads)?;
    }
    Ok(total / order.len().max(1) as f64)
}

pub(crate) fn shuffled(n: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}
