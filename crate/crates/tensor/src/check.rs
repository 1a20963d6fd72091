//! Central finite-difference gradient checking.

use crate::autograd::grad;
use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub checked: usize,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Denominator floor for relative error, so entries whose true gradient is
/// numerically zero are judged on absolute error.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// Compares the analytic gradient of the scalar `f(inputs)` against central
/// differences with step `eps` for every element of every input.
pub fn check_gradients<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<GradCheck>
where
    F: Fn(&[Tensor]) -> Result<Tensor>,
{
    let leaves: Vec<Tensor> = inputs.iter().map(Tensor::requiring_grad).collect();
    let out = f(&leaves)?;
    let analytic = grad(&out, &leaves, false)?;

    // Perturbed evaluations use detached inputs; recording stays on so that
    // closures which call `grad` internally still work.
    let mut report = GradCheck {
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        checked: 0,
    };
    for (i, input) in inputs.iter().enumerate() {
        for j in 0..input.numel() {
            let eval = |delta: f64| -> Result<f64> {
                let mut values = input.to_vec();
                values[j] += delta;
                let mut args: Vec<Tensor> = inputs.iter().map(Tensor::detach).collect();
                args[i] = Tensor::new(input.shape(), values)?;
                f(&args)?.item()
            };
            let numeric = (eval(eps)? - eval(-eps)?) / (2.0 * eps);
            let a = analytic[i].data()[j];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
            report.max_abs_err = report.max_abs_err.max(abs);
            report.max_rel_err = report.max_rel_err.max(rel);
            report.checked += 1;
        }
    }
    Ok(report)
}
