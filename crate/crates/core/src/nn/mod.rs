//! Dense feed-forward networks in double precision.
//!
//! A network is a stack of affine layers `z = W x + b`. Hidden layers apply a
//! shared element-wise nonlinearity; the last layer applies an output head
//! (identity, softmax, or a sigmoid scaled into `[0, scale]`).
//!
//! Weights are row-major with shape `(out, in)`. [`MlpParams::forward`] records
//! every pre- and post-activation in an [`ActivationTrace`] which
//! [`MlpParams::backward`] consumes to produce exact gradients.

mod checkpoint;
mod gradcheck;
mod loss;
mod optim;

pub use checkpoint::{parse_checkpoint, RawCheckpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{gradient_check, FD_STEP};
pub use loss::{evaluate_loss, LossSpec, RateContext};
pub use optim::{apply_update, OptimizerKind, OptimizerState};

use rand::Rng;

use crate::rng::seeded;
use crate::{Error, Result};

/// Nonlinearity applied after every hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hidden {
    Relu,
    Tanh,
    Identity,
}

/// Transform applied to the last layer's pre-activations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputHead {
    Linear,
    Softmax,
    /// `scale * sigmoid(z)`, used for box-constrained power outputs.
    Sigmoid { scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activation {
    pub hidden: Hidden,
    pub output: OutputHead,
}

impl Activation {
    pub const fn new(hidden: Hidden, output: OutputHead) -> Self {
        Self { hidden, output }
    }

    /// Purely affine network.
    pub const fn linear() -> Self {
        Self::new(Hidden::Identity, OutputHead::Linear)
    }

    /// ReLU hidden layers with a linear output (value networks).
    pub const fn relu() -> Self {
        Self::new(Hidden::Relu, OutputHead::Linear)
    }

    pub const fn tanh() -> Self {
        Self::new(Hidden::Tanh, OutputHead::Linear)
    }
}

/// Weights and biases of a dense network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
}

/// All pre-activations (`pre[l]`, one per layer) and post-activations
/// (`post[0]` is the input, `post[l + 1]` the output of layer `l`).
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl ActivationTrace {
    pub fn output(&self) -> &[f64] {
        self.post.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn input(&self) -> &[f64] {
        &self.post[0]
    }
}

/// Gradients (or optimizer accumulators) shaped like an [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::config(format!(
            "a network needs at least 2 layer sizes, got {}",
            layer_sizes.len()
        )));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(Error::config(format!(
            "layer sizes must be positive: {layer_sizes:?}"
        )));
    }
    Ok(())
}

impl MlpParams {
    /// Random initialization: weights uniform with zero mean and standard
    /// deviation `1/sqrt(fan_in)`, biases zero. Bit-identical for equal
    /// `(layer_sizes, activation, seed)`.
    pub fn init(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let mut rng = seeded(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (3.0 / fan_in as f64).sqrt();
            let w = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            activation,
        })
    }

    /// Assemble from explicit tensors, validating shapes and finiteness.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
        activation: Activation,
    ) -> Result<Self> {
        check_sizes(&layer_sizes)?;
        let layers = layer_sizes.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::shape(format!(
                "expected {layers} weight and bias blocks, got {} and {}",
                weights.len(),
                biases.len()
            )));
        }
        for (l, pair) in layer_sizes.windows(2).enumerate() {
            if weights[l].len() != pair[0] * pair[1] {
                return Err(Error::shape(format!(
                    "layer {l}: weight block has {} entries, expected {}x{}",
                    weights[l].len(),
                    pair[1],
                    pair[0]
                )));
            }
            if biases[l].len() != pair[1] {
                return Err(Error::shape(format!(
                    "layer {l}: bias has {} entries, expected {}",
                    biases[l].len(),
                    pair[1]
                )));
            }
        }
        let finite = weights.iter().chain(&biases).flatten().all(|x| x.is_finite());
        if !finite {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        Ok(Self {
            layer_sizes,
            weights,
            biases,
            activation,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.weights[layer]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.biases[layer]
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// Parameter `index` in flat order: per layer, weights then biases.
    pub fn param(&self, index: usize) -> f64 {
        *flat_ref(&self.weights, &self.biases, index)
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        *flat_mut(&mut self.weights, &mut self.biases, index) = value;
    }

    pub fn forward(&self, input: &[f64]) -> Result<ActivationTrace> {
        if input.len() != self.input_width() {
            return Err(Error::shape(format!(
                "input has length {}, network expects {}",
                input.len(),
                self.input_width()
            )));
        }
        let layers = self.n_layers();
        let mut pre = Vec::with_capacity(layers);
        let mut post = Vec::with_capacity(layers + 1);
        post.push(input.to_vec());
        for l in 0..layers {
            let z = self.affine(l, &post[l]);
            let a = if l + 1 == layers {
                apply_head(self.activation.output, &z)
            } else {
                apply_hidden(self.activation.hidden, &z)
            };
            pre.push(z);
            post.push(a);
        }
        Ok(ActivationTrace { pre, post })
    }

    /// Output vector only.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_width() {
            return Err(Error::shape(format!(
                "input has length {}, network expects {}",
                input.len(),
                self.input_width()
            )));
        }
        let layers = self.n_layers();
        let mut x = input.to_vec();
        for l in 0..layers {
            let z = self.affine(l, &x);
            x = if l + 1 == layers {
                apply_head(self.activation.output, &z)
            } else {
                apply_hidden(self.activation.hidden, &z)
            };
        }
        Ok(x)
    }

    fn affine(&self, layer: usize, x: &[f64]) -> Vec<f64> {
        let w = &self.weights[layer];
        let n_in = x.len();
        self.biases[layer]
            .iter()
            .enumerate()
            .map(|(o, &b)| {
                let row = &w[o * n_in..(o + 1) * n_in];
                b + row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>()
            })
            .collect()
    }

    /// Exact gradient of a scalar loss given `dL/d(output)`.
    pub fn backward(&self, trace: &ActivationTrace, output_gradient: &[f64]) -> Result<ParamGrads> {
        let mut grads = ParamGrads::zeros_like(self);
        self.backward_into(trace, output_gradient, &mut grads)?;
        Ok(grads)
    }

    /// Like [`backward`](Self::backward) but adds into `grads`, so minibatch
    /// gradients can be accumulated without reallocating.
    pub fn backward_into(
        &self,
        trace: &ActivationTrace,
        output_gradient: &[f64],
        grads: &mut ParamGrads,
    ) -> Result<()> {
        let layers = self.n_layers();
        let trace_ok = trace.pre.len() == layers
            && trace.post.len() == layers + 1
            && trace
                .post
                .iter()
                .zip(&self.layer_sizes)
                .all(|(p, &s)| p.len() == s);
        if !trace_ok {
            return Err(Error::shape("activation trace does not match network"));
        }
        if output_gradient.len() != self.output_width() {
            return Err(Error::shape(format!(
                "output gradient has length {}, network outputs {}",
                output_gradient.len(),
                self.output_width()
            )));
        }
        if grads.weights.len() != layers {
            return Err(Error::shape("gradient buffer does not match network"));
        }

        let mut delta = head_backward(self.activation.output, trace.output(), output_gradient);
        for l in (0..layers).rev() {
            let x = &trace.post[l];
            let n_in = x.len();
            let gw = &mut grads.weights[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (g, &xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                    *g += d * xi;
                }
            }
            for (g, &d) in grads.biases[l].iter_mut().zip(&delta) {
                *g += d;
            }
            if l == 0 {
                break;
            }
            let w = &self.weights[l];
            let mut upstream = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (u, &wi) in upstream.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *u += d * wi;
                }
            }
            let hidden = self.activation.hidden;
            delta = upstream
                .iter()
                .zip(&trace.pre[l - 1])
                .zip(&trace.post[l])
                .map(|((u, &z), &a)| u * hidden_derivative(hidden, z, a))
                .collect();
        }
        Ok(())
    }
}

fn apply_hidden(kind: Hidden, z: &[f64]) -> Vec<f64> {
    match kind {
        Hidden::Relu => z.iter().map(|&v| v.max(0.0)).collect(),
        Hidden::Tanh => z.iter().map(|&v| v.tanh()).collect(),
        Hidden::Identity => z.to_vec(),
    }
}

fn hidden_derivative(kind: Hidden, z: f64, a: f64) -> f64 {
    match kind {
        Hidden::Relu => {
            if z > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Hidden::Tanh => 1.0 - a * a,
        Hidden::Identity => 1.0,
    }
}

/// Numerically stable softmax (max-shifted).
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn apply_head(head: OutputHead, z: &[f64]) -> Vec<f64> {
    match head {
        OutputHead::Linear => z.to_vec(),
        OutputHead::Softmax => softmax(z),
        OutputHead::Sigmoid { scale } => z.iter().map(|&v| scale * sigmoid(v)).collect(),
    }
}

fn head_backward(head: OutputHead, y: &[f64], g: &[f64]) -> Vec<f64> {
    match head {
        OutputHead::Linear => g.to_vec(),
        OutputHead::Softmax => {
            let dot: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
            y.iter().zip(g).map(|(&yi, &gi)| yi * (gi - dot)).collect()
        }
        OutputHead::Sigmoid { scale } => y
            .iter()
            .zip(g)
            .map(|(&yi, &gi)| {
                let s = yi / scale;
                gi * scale * s * (1.0 - s)
            })
            .collect(),
    }
}

fn flat_ref<'a>(weights: &'a [Vec<f64>], biases: &'a [Vec<f64>], mut index: usize) -> &'a f64 {
    for (w, b) in weights.iter().zip(biases) {
        if index < w.len() {
            return &w[index];
        }
        index -= w.len();
        if index < b.len() {
            return &b[index];
        }
        index -= b.len();
    }
    panic!("parameter index out of range");
}

fn flat_mut<'a>(
    weights: &'a mut [Vec<f64>],
    biases: &'a mut [Vec<f64>],
    mut index: usize,
) -> &'a mut f64 {
    for (w, b) in weights.iter_mut().zip(biases.iter_mut()) {
        if index < w.len() {
            return &mut w[index];
        }
        index -= w.len();
        if index < b.len() {
            return &mut b[index];
        }
        index -= b.len();
    }
    panic!("parameter index out of range");
}

impl ParamGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        *flat_ref(&self.weights, &self.biases, index)
    }

    pub fn len(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matches(&self, params: &MlpParams) -> bool {
        self.weights.len() == params.weights.len()
            && self
                .weights
                .iter()
                .zip(&params.weights)
                .chain(self.biases.iter().zip(&params.biases))
                .all(|(a, b)| a.len() == b.len())
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|x| x.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|x| *x *= factor);
    }

    pub fn fill_zero(&mut self) {
        self.values_mut().for_each(|x| *x = 0.0);
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b;
        }
    }

    /// Euclidean norm over every entry.
    pub fn norm(&self) -> f64 {
        self.values().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.biases).flatten()
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.biases.iter_mut()).flatten()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_net() -> MlpParams {
        MlpParams::from_parts(
            vec![2, 2],
            vec![vec![1.0, 0.0, 0.0, 1.0]],
            vec![vec![0.0, 0.0]],
            Activation::linear(),
        )
        .unwrap()
    }

    /// Independent naive forward pass used as an oracle.
    fn naive_forward(params: &MlpParams, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        let n = params.n_layers();
        for l in 0..n {
            let rows = params.layer_sizes()[l + 1];
            let cols = params.layer_sizes()[l];
            let mut z = vec![0.0; rows];
            for r in 0..rows {
                let mut acc = params.biases(l)[r];
                for c in 0..cols {
                    acc += params.weights(l)[r * cols + c] * x[c];
                }
                z[r] = acc;
            }
            x = if l + 1 == n {
                match params.activation().output {
                    OutputHead::Linear => z,
                    OutputHead::Softmax => {
                        let s: f64 = z.iter().map(|v| v.exp()).sum();
                        z.iter().map(|v| v.exp() / s).collect()
                    }
                    OutputHead::Sigmoid { scale } => {
                        z.iter().map(|v| scale / (1.0 + (-v).exp())).collect()
                    }
                }
            } else {
                match params.activation().hidden {
                    Hidden::Relu => z.iter().map(|v| if *v > 0.0 { *v } else { 0.0 }).collect(),
                    Hidden::Tanh => z.iter().map(|v| v.tanh()).collect(),
                    Hidden::Identity => z,
                }
            };
        }
        x
    }

    #[test]
    fn init_zero_bias_and_shape() {
        let p = MlpParams::init(&[2, 1], Activation::linear(), 7).unwrap();
        assert_eq!(p.weights(0).len(), 2);
        assert_eq!(p.biases(0), &[0.0]);
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = MlpParams::init(&[4, 8, 3], Activation::relu(), 1).unwrap();
        let b = MlpParams::init(&[4, 8, 3], Activation::relu(), 1).unwrap();
        let c = MlpParams::init(&[4, 8, 3], Activation::relu(), 2).unwrap();
        assert_eq!(a.to_checkpoint(), b.to_checkpoint());
        assert_ne!(a.to_checkpoint(), c.to_checkpoint());
    }

    #[test]
    fn init_rejects_bad_sizes() {
        assert!(matches!(MlpParams::init(&[], Activation::relu(), 0), Err(Error::Config(_))));
        assert!(matches!(MlpParams::init(&[3], Activation::relu(), 0), Err(Error::Config(_))));
        assert!(matches!(
            MlpParams::init(&[3, 0, 1], Activation::relu(), 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn identity_forward() {
        let out = identity_net().predict(&[3.0, -1.0]).unwrap();
        assert_eq!(out, vec![3.0, -1.0]);
    }

    #[test]
    fn relu_zero_input_gives_zero_output() {
        let p = MlpParams::init(&[3, 6, 2], Activation::relu(), 11).unwrap();
        assert_eq!(p.predict(&[0.0; 3]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn forward_matches_naive_reference() {
        for (seed, act) in [
            (3, Activation::tanh()),
            (4, Activation::relu()),
            (5, Activation::new(Hidden::Tanh, OutputHead::Softmax)),
            (6, Activation::new(Hidden::Relu, OutputHead::Sigmoid { scale: 2.0 })),
        ] {
            let p = MlpParams::init(&[3, 5, 2], act, seed).unwrap();
            let x = [0.3, -1.2, 0.7];
            let got = p.forward(&x).unwrap();
            let want = naive_forward(&p, &x);
            for (g, w) in got.output().iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "{g} vs {w}");
            }
            assert_eq!(got.output(), p.predict(&x).unwrap().as_slice());
        }
    }

    #[test]
    fn softmax_output_is_distribution() {
        let p = MlpParams::init(&[4, 7, 5], Activation::new(Hidden::Tanh, OutputHead::Softmax), 9)
            .unwrap();
        let y = p.predict(&[10.0, -3.0, 0.5, 2.0]).unwrap();
        assert!(y.iter().all(|&v| v >= 0.0));
        assert!((y.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = identity_net();
        assert!(matches!(p.forward(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn linear_scalar_gradient() {
        let p = MlpParams::from_parts(vec![1, 1], vec![vec![0.5]], vec![vec![0.0]], Activation::linear())
            .unwrap();
        let trace = p.forward(&[2.0]).unwrap();
        let g = p.backward(&trace, &[1.0]).unwrap();
        assert_eq!(g.weights[0], vec![2.0]);
        assert_eq!(g.biases[0], vec![1.0]);
    }

    #[test]
    fn dead_relu_units_have_zero_first_layer_grads() {
        // All first-layer pre-activations negative: nothing flows back.
        let p = MlpParams::from_parts(
            vec![2, 3, 1],
            vec![vec![-1.0; 6], vec![1.0, 1.0, 1.0]],
            vec![vec![-0.5; 3], vec![0.0]],
            Activation::relu(),
        )
        .unwrap();
        let trace = p.forward(&[1.0, 2.0]).unwrap();
        let g = p.backward(&trace, &[1.0]).unwrap();
        assert!(g.weights[0].iter().all(|&v| v == 0.0));
        assert!(g.biases[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_foreign_trace() {
        let a = MlpParams::init(&[2, 3, 1], Activation::tanh(), 1).unwrap();
        let b = MlpParams::init(&[2, 4, 1], Activation::tanh(), 1).unwrap();
        let trace = b.forward(&[0.1, 0.2]).unwrap();
        assert!(matches!(a.backward(&trace, &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn flat_indexing_round_trips() {
        let mut p = MlpParams::init(&[2, 3, 2], Activation::tanh(), 4).unwrap();
        for i in 0..p.param_count() {
            p.set_param(i, i as f64);
        }
        for i in 0..p.param_count() {
            assert_eq!(p.param(i), i as f64);
        }
        assert_eq!(p.weights(1)[0], 9.0);
    }

    #[test]
    fn forward_is_pure() {
        let p = MlpParams::init(&[3, 4, 2], Activation::tanh(), 8).unwrap();
        let x = [0.1, 0.2, 0.3];
        assert_eq!(p.forward(&x).unwrap(), p.forward(&x).unwrap());
    }
}
