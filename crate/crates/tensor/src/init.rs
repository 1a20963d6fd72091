use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::tensor::Tensor;

/// Uniform He-style initialization: `U(-√(6/fan_in), √(6/fan_in))`.
pub fn he_uniform<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape, data).expect("length matches shape")
}

/// Latent-vector distribution for the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LatentDistribution {
    /// `U(-1, 1)` per element.
    #[default]
    Uniform,
    /// Standard normal per element.
    Normal,
}

impl LatentDistribution {
    pub fn sample<R: Rng + ?Sized>(self, batch: usize, len: usize, rng: &mut R) -> Tensor {
        let n = batch * len;
        let data: Vec<f64> = match self {
            LatentDistribution::Uniform => (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            LatentDistribution::Normal => (0..n).map(|_| StandardNormal.sample(rng)).collect(),
        };
        Tensor::new(&[batch, len], data).expect("length matches shape")
    }
}
