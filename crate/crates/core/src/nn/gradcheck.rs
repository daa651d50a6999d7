use super::{evaluate_loss, LossSpec, MlpParams};
use crate::Result;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Largest `|analytic - numeric| / max(1, |numeric|)` over every parameter.
pub fn gradient_check(
    params: &MlpParams,
    loss: &LossSpec<'_>,
    input: &[f64],
    target: Option<&[f64]>,
) -> Result<f64> {
    let trace = params.forward(input)?;
    let (_, out_grad) = evaluate_loss(loss, trace.output(), target)?;
    let analytic = params.backward(&trace, &out_grad)?;

    let value_at = |p: &MlpParams| -> Result<f64> {
        let y = p.predict(input)?;
        Ok(evaluate_loss(loss, &y, target)?.0)
    };

    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for i in 0..params.param_count() {
        let base = params.param(i);
        probe.set_param(i, base + FD_STEP);
        let up = value_at(&probe)?;
        probe.set_param(i, base - FD_STEP);
        let down = value_at(&probe)?;
        probe.set_param(i, base);
        let numeric = (up - down) / (2.0 * FD_STEP);
        let err = (analytic.get(i) - numeric).abs() / numeric.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}
