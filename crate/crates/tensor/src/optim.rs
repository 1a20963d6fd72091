use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for one parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(params: &[Tensor], config: AdamConfig) -> Self {
        AdamState {
            step: 0,
            first_moment: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            second_moment: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            config,
        }
    }
}

/// One bias-corrected Adam update. Returns the new parameter values as
/// fresh trainable leaves.
pub fn adam_step(
    params: &[Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
) -> Result<Vec<Tensor>> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(TensorError::invalid(
            "adam_step",
            format!(
                "{} params, {} grads, state for {}",
                params.len(),
                grads.len(),
                state.first_moment.len()
            ),
        ));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.first_moment) {
        if p.shape() != g.shape() || m.len() != p.numel() {
            return Err(TensorError::shape("adam_step", p.shape(), g.shape()));
        }
    }
    state.step += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let mut out = Vec::with_capacity(params.len());
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        let mut next = p.to_vec();
        for (j, (&gj, w)) in g.data().iter().zip(next.iter_mut()).enumerate() {
            m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
            v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        out.push(Tensor::param(p.shape(), next)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let p = vec![Tensor::param(&[3], vec![1.0, -2.0, 0.5]).unwrap()];
        let g = vec![Tensor::zeros(&[3])];
        let mut s = AdamState::new(&p, AdamConfig::default());
        let next = adam_step(&p, &g, &mut s).unwrap();
        assert_eq!(next[0].to_vec(), p[0].to_vec());
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let p = vec![Tensor::param(&[1], vec![0.3]).unwrap()];
        let g = vec![Tensor::ones(&[1])];
        let mut s = AdamState::new(&p, AdamConfig::default());
        let next = adam_step(&p, &g, &mut s).unwrap();
        assert!((next[0].data()[0] - 0.3 + 1e-4).abs() < 1e-9);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = vec![Tensor::param(&[2], vec![0.0, 0.0]).unwrap()];
        let mut s = AdamState::new(&p, AdamConfig::default());
        assert!(adam_step(&p, &[Tensor::zeros(&[3])], &mut s).is_err());
    }
}
