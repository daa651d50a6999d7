use super::{MlpParams, ParamGrads};
use crate::{Error, Result};

const EPS: f64 = 1e-8;
const RMSPROP_DECAY: f64 = 0.99;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    RmsProp,
    Adam,
}

/// First-order optimizer with per-parameter accumulators.
///
/// - SGD: `p -= a * g`
/// - RMSprop: `v = 0.99 v + 0.01 g^2`, `p -= a * g / (sqrt(v) + 1e-8)`
/// - Adam: bias-corrected moments with decays 0.9 / 0.999 and `eps = 1e-8`
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    kind: OptimizerKind,
    step_size: f64,
    first: ParamGrads,
    second: ParamGrads,
    step: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, step_size: f64, params: &MlpParams) -> Result<Self> {
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::config(format!("step size must be positive, got {step_size}")));
        }
        Ok(Self {
            kind,
            step_size,
            first: ParamGrads::zeros_like(params),
            second: ParamGrads::zeros_like(params),
            step: 0,
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn set_step_size(&mut self, step_size: f64) {
        self.step_size = step_size;
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Take one descent step. Non-finite gradients are rejected before any
    /// parameter or accumulator is touched.
    pub fn apply(&mut self, params: &mut MlpParams, grads: &ParamGrads) -> Result<()> {
        if !grads.matches(params) || !self.first.matches(params) {
            return Err(Error::shape("gradient shapes do not match parameters"));
        }
        if !grads.is_finite() {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        self.step += 1;
        let a = self.step_size;
        let layers = params.n_layers();
        for l in 0..layers {
            self.update_block(
                params.weights_mut(l),
                &grads.weights[l],
                BlockId::Weights(l),
                a,
            );
            self.update_block(params.biases_mut(l), &grads.biases[l], BlockId::Biases(l), a);
        }
        Ok(())
    }

    fn update_block(&mut self, p: &mut [f64], g: &[f64], id: BlockId, a: f64) {
        let (m, v) = match id {
            BlockId::Weights(l) => (&mut self.first.weights[l], &mut self.second.weights[l]),
            BlockId::Biases(l) => (&mut self.first.biases[l], &mut self.second.biases[l]),
        };
        match self.kind {
            OptimizerKind::Sgd => {
                for (pi, gi) in p.iter_mut().zip(g) {
                    *pi -= a * gi;
                }
            }
            OptimizerKind::RmsProp => {
                for ((pi, gi), vi) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                    *vi = RMSPROP_DECAY * *vi + (1.0 - RMSPROP_DECAY) * gi * gi;
                    *pi -= a * gi / (vi.sqrt() + EPS);
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                for (((pi, gi), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut())
                {
                    *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gi;
                    *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gi * gi;
                    *pi -= a * (*mi / c1) / ((*vi / c2).sqrt() + EPS);
                }
            }
        }
    }
}

#[derive(Clone, Copy)]
enum BlockId {
    Weights(usize),
    Biases(usize),
}

/// Free-function form of [`OptimizerState::apply`].
pub fn apply_update(params: &mut MlpParams, grads: &ParamGrads, opt: &mut OptimizerState) -> Result<()> {
    opt.apply(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    fn scalar(p: f64) -> MlpParams {
        MlpParams::from_parts(vec![1, 1], vec![vec![p]], vec![vec![0.0]], Activation::linear()).unwrap()
    }

    fn grad(g: f64) -> ParamGrads {
        ParamGrads {
            weights: vec![vec![g]],
            biases: vec![vec![0.0]],
        }
    }

    #[test]
    fn sgd_one_step() {
        let mut p = scalar(1.0);
        let mut opt = OptimizerState::new(OptimizerKind::Sgd, 0.1, &p).unwrap();
        opt.apply(&mut p, &grad(0.5)).unwrap();
        assert!((p.weights(0)[0] - 0.95).abs() < 1e-15);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn zero_gradient_is_noop_for_all_kinds() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::RmsProp, OptimizerKind::Adam] {
            let mut p = MlpParams::init(&[3, 4, 2], Activation::tanh(), 3).unwrap();
            let before = p.clone();
            let mut opt = OptimizerState::new(kind, 0.01, &p).unwrap();
            let zeros = ParamGrads::zeros_like(&p);
            for _ in 0..5 {
                opt.apply(&mut p, &zeros).unwrap();
            }
            assert_eq!(p, before, "{kind:?}");
        }
    }

    #[test]
    fn adam_constant_gradient_descends_monotonically() {
        let mut p = scalar(0.0);
        let mut opt = OptimizerState::new(OptimizerKind::Adam, 1e-3, &p).unwrap();
        let mut prev = p.weights(0)[0];
        for step in 0..1000 {
            opt.apply(&mut p, &grad(1.0)).unwrap();
            let now = p.weights(0)[0];
            if step >= 1 {
                assert!(now < prev, "step {step}: {now} !< {prev}");
            }
            prev = now;
        }
        // Bias-corrected Adam with a constant gradient moves ~a per step.
        assert!((prev + 1.0).abs() < 1e-3, "{prev}");
    }

    #[test]
    fn nan_gradient_leaves_params_untouched() {
        let mut p = scalar(1.0);
        let mut opt = OptimizerState::new(OptimizerKind::Adam, 0.1, &p).unwrap();
        let err = opt.apply(&mut p, &grad(f64::NAN)).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert_eq!(p.weights(0)[0], 1.0);
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn rejects_nonpositive_step() {
        let p = scalar(1.0);
        assert!(OptimizerState::new(OptimizerKind::Sgd, 0.0, &p).is_err());
    }
}
