//! The generator, critic, label classifier and denoiser networks.
//!
//! A [`NetworkSpec`] is a flat list of [`LayerSpec`]s; a [`Network`] pairs
//! it with named parameters. Parameter names follow
//! `{network}.{layer tag}{ordinal}.{param}`, where the ordinal counts layers
//! of the same tag, so the critic's third convolution kernel is
//! `critic.conv2.weight` whether or not phase-shuffle layers are present.

use std::collections::HashMap;
use std::path::Path;

use ecg_tensor::nn::{self, NormMode, RunningStats};
use ecg_tensor::{he_uniform, LayerSpec, ParamStore, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::{FRAMES, MEL_BANDS};
use crate::error::{CoreError, Result};
use crate::signal::LABEL_COUNT;

const KERNEL: usize = 25;
const STRIDE: usize = 4;
const LEAK: f64 = 0.2;
/// Transposed-convolution stages between the generator's dense seed and its
/// output.
const UPSAMPLING_STAGES: u32 = 5;
const CLASSIFIER_FILTERS: usize = 64;
/// Convolutions the denoiser encoder shares with the critic.
pub const SHARED_CONVS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetworkKind {
    Generator,
    Critic,
    Inception,
    Denoiser,
}

impl NetworkKind {
    pub fn name(self) -> &'static str {
        match self {
            NetworkKind::Generator => "generator",
            NetworkKind::Critic => "critic",
            NetworkKind::Inception => "inception",
            NetworkKind::Denoiser => "denoiser",
        }
    }
}

/// Size knobs shared by the signal networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchConfig {
    pub model_dim: usize,
    pub latent_len: usize,
    pub signal_len: usize,
    /// Length of the generator's first feature map; the output before
    /// cropping is this times `4^5`.
    pub seed_len: usize,
}

impl ArchConfig {
    /// Full-size networks: d = 16, 100-dim latent, 10 s at 500 Hz.
    pub fn full_scale() -> Self {
        ArchConfig {
            model_dim: 16,
            latent_len: 100,
            signal_len: 5000,
            seed_len: 8,
        }
    }

    /// Smallest generator seed that still covers `signal_len`.
    pub fn for_length(model_dim: usize, latent_len: usize, signal_len: usize) -> Self {
        ArchConfig {
            model_dim,
            latent_len,
            signal_len,
            seed_len: signal_len.div_ceil(STRIDE.pow(UPSAMPLING_STAGES)),
        }
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("model_dim", self.model_dim),
            ("latent_len", self.latent_len),
            ("signal_len", self.signal_len),
            ("seed_len", self.seed_len),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(CoreError::InvalidParameter(format!(
                "{name} must be positive"
            )));
        }
        if self.seed_len * STRIDE.pow(UPSAMPLING_STAGES) < self.signal_len {
            return Err(CoreError::InvalidParameter(format!(
                "generator seed length {} cannot reach {} samples",
                self.seed_len, self.signal_len
            )));
        }
        Ok(())
    }
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self::full_scale()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub kind: NetworkKind,
    pub arch: ArchConfig,
    /// Per-sample input shape.
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

fn conv(in_channels: usize, out_channels: usize) -> LayerSpec {
    LayerSpec::Conv1d {
        kernel: KERNEL,
        in_channels,
        out_channels,
        stride: STRIDE,
    }
}

fn tconv(in_channels: usize, out_channels: usize) -> LayerSpec {
    LayerSpec::ConvTranspose1d {
        kernel: KERNEL,
        in_channels,
        out_channels,
        stride: STRIDE,
    }
}

fn lrelu() -> LayerSpec {
    LayerSpec::LeakyRelu { alpha: LEAK }
}

/// Channel pairs of the critic's five convolutions.
fn critic_channels(d: usize) -> [(usize, usize); 5] {
    [(1, 1), (1, d), (d, 2 * d), (2 * d, 4 * d), (4 * d, 8 * d)]
}

impl NetworkSpec {
    pub fn generator(arch: ArchConfig) -> Result<Self> {
        arch.validate()?;
        let d = arch.model_dim;
        let mut layers = vec![
            LayerSpec::Dense {
                inputs: arch.latent_len,
                outputs: arch.seed_len * 16 * d,
            },
            LayerSpec::Reshape {
                shape: vec![arch.seed_len, 16 * d],
            },
        ];
        for (c_in, c_out) in [(16 * d, 8 * d), (8 * d, 4 * d), (4 * d, 2 * d), (2 * d, d)] {
            layers.extend([
                tconv(c_in, c_out),
                LayerSpec::BatchNorm { channels: c_out },
                lrelu(),
            ]);
        }
        layers.extend([
            tconv(d, 1),
            LayerSpec::Crop {
                target: arch.signal_len,
            },
            LayerSpec::Tanh,
        ]);
        Ok(NetworkSpec {
            kind: NetworkKind::Generator,
            arch,
            input_shape: vec![arch.latent_len],
            layers,
        })
    }

    /// `shuffle_radius` 0 leaves the phase-shuffle layers out.
    pub fn critic(arch: ArchConfig, shuffle_radius: usize) -> Result<Self> {
        arch.validate()?;
        let d = arch.model_dim;
        let mut layers = Vec::new();
        let mut len = arch.signal_len;
        for (c_in, c_out) in critic_channels(d) {
            layers.push(conv(c_in, c_out));
            if shuffle_radius > 0 {
                layers.push(LayerSpec::PhaseShuffle {
                    radius: shuffle_radius,
                });
            }
            layers.push(lrelu());
            len = len.div_ceil(STRIDE);
        }
        layers.extend([
            LayerSpec::Reshape {
                shape: vec![len * 8 * d],
            },
            LayerSpec::Dense {
                inputs: len * 8 * d,
                outputs: 1,
            },
        ]);
        Ok(NetworkSpec {
            kind: NetworkKind::Critic,
            arch,
            input_shape: vec![arch.signal_len, 1],
            layers,
        })
    }

    /// Label classifier over 64×64 Mel spectrograms; its shape does not
    /// depend on the signal architecture.
    pub fn inception() -> Self {
        let mut layers = Vec::new();
        let mut c_in = 1;
        for _ in 0..3 {
            layers.extend([
                LayerSpec::Conv2d {
                    kernel: 3,
                    in_channels: c_in,
                    out_channels: CLASSIFIER_FILTERS,
                    stride: 2,
                },
                LayerSpec::BatchNorm {
                    channels: CLASSIFIER_FILTERS,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool2d { pool: 2, stride: 2 },
            ]);
            c_in = CLASSIFIER_FILTERS;
        }
        layers.extend([
            LayerSpec::Reshape {
                shape: vec![CLASSIFIER_FILTERS],
            },
            LayerSpec::Dense {
                inputs: CLASSIFIER_FILTERS,
                outputs: LABEL_COUNT,
            },
            LayerSpec::Sigmoid,
        ]);
        NetworkSpec {
            kind: NetworkKind::Inception,
            arch: ArchConfig::full_scale(),
            input_shape: vec![FRAMES, MEL_BANDS, 1],
            layers,
        }
    }

    /// `shuffle_radius` > 0 puts a phase shuffle before each encoder
    /// convolution.
    pub fn denoiser(arch: ArchConfig, shuffle_radius: usize) -> Result<Self> {
        arch.validate()?;
        let d = arch.model_dim;
        let mut layers = Vec::new();
        for (c_in, c_out) in critic_channels(d).into_iter().take(SHARED_CONVS) {
            if shuffle_radius > 0 {
                layers.push(LayerSpec::PhaseShuffle {
                    radius: shuffle_radius,
                });
            }
            layers.extend([conv(c_in, c_out), lrelu()]);
        }
        for (c_in, c_out) in [(4 * d, 4 * d), (4 * d, 2 * d), (2 * d, d), (d, 1)] {
            layers.extend([tconv(c_in, c_out), lrelu()]);
        }
        layers.extend([
            LayerSpec::Crop {
                target: arch.signal_len,
            },
            LayerSpec::Tanh,
        ]);
        Ok(NetworkSpec {
            kind: NetworkKind::Denoiser,
            arch,
            input_shape: vec![arch.signal_len, 1],
            layers,
        })
    }

    /// Per-sample output shape of every layer, in order.
    pub fn output_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shape = self.input_shape.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            shape = layer.output_shape(&shape)?;
            out.push(shape.clone());
        }
        Ok(out)
    }

    pub fn count_params(&self) -> usize {
        self.layers.iter().map(LayerSpec::trainable_count).sum()
    }

    /// `{network}.{tag}{ordinal}` for every layer.
    pub fn layer_names(&self) -> Vec<String> {
        let mut seen: HashMap<&'static str, usize> = HashMap::new();
        self.layers
            .iter()
            .map(|l| {
                let ordinal = seen.entry(l.tag()).or_insert(0);
                let name = format!("{}.{}{}", self.kind.name(), l.tag(), ordinal);
                *ordinal += 1;
                name
            })
            .collect()
    }
}

/// Whether a forward pass trains (batch statistics, phase shuffle on) or
/// infers (running statistics, no shuffle).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

fn fan_in(layer: &LayerSpec) -> usize {
    match *layer {
        LayerSpec::Dense { inputs, .. } => inputs,
        LayerSpec::Conv1d {
            kernel,
            in_channels,
            ..
        } => kernel * in_channels,
        // Each output sample of a transposed convolution sees only every
        // stride-th tap.
        LayerSpec::ConvTranspose1d {
            kernel,
            in_channels,
            stride,
            ..
        } => kernel.div_ceil(stride) * in_channels,
        LayerSpec::Conv2d {
            kernel,
            in_channels,
            ..
        } => kernel * kernel * in_channels,
        _ => 1,
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    names: Vec<String>,
    params: ParamStore,
    shuffle_rng: ChaCha8Rng,
}

impl Network {
    /// Builds the network with freshly initialized parameters: He-uniform
    /// kernels, zero biases, unit batch-norm scale. The phase-shuffle stream
    /// is seeded from the same `seed`.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names = spec.layer_names();
        let mut params = ParamStore::new();
        for (layer, prefix) in spec.layers.iter().zip(&names) {
            for slot in layer.params() {
                let value = match slot.name {
                    "weight" => he_uniform(&slot.shape, fan_in(layer), &mut rng),
                    "gamma" | "running_var" => Tensor::ones(&slot.shape),
                    _ => Tensor::zeros(&slot.shape),
                };
                params.insert(format!("{prefix}.{}", slot.name), value, slot.trainable)?;
            }
        }
        let shuffle_rng = ChaCha8Rng::seed_from_u64(rng.random());
        Ok(Network {
            spec,
            names,
            params,
            shuffle_rng,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn kind(&self) -> NetworkKind {
        self.spec.kind
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn count_params(&self) -> usize {
        self.params.count_trainable()
    }

    pub fn reseed_shuffle(&mut self, seed: u64) {
        self.shuffle_rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut h = x.clone();
        for i in 0..self.spec.layers.len() {
            h = self.apply(i, &h, mode)?;
        }
        Ok(h)
    }

    /// Output of every layer, in order.
    pub fn trace(&mut self, x: &Tensor, mode: Mode) -> Result<Vec<Tensor>> {
        let mut outs = Vec::with_capacity(self.spec.layers.len());
        let mut h = x.clone();
        for i in 0..self.spec.layers.len() {
            h = self.apply(i, &h, mode)?;
            outs.push(h.clone());
        }
        Ok(outs)
    }

    fn param(&self, layer: usize, name: &str) -> Result<&Tensor> {
        Ok(self.params.get(&format!("{}.{name}", self.names[layer]))?)
    }

    fn apply(&mut self, i: usize, h: &Tensor, mode: Mode) -> Result<Tensor> {
        let out = match &self.spec.layers[i] {
            LayerSpec::Dense { .. } => {
                nn::dense(h, self.param(i, "weight")?, self.param(i, "bias")?)?
            }
            LayerSpec::Conv1d { stride, .. } => nn::conv1d(h, self.param(i, "weight")?, *stride)?
                .add_channel(self.param(i, "bias")?)?,
            LayerSpec::ConvTranspose1d { stride, .. } => {
                nn::conv_transpose1d(h, self.param(i, "weight")?, *stride)?
                    .add_channel(self.param(i, "bias")?)?
            }
            LayerSpec::Conv2d { stride, .. } => nn::conv2d(h, self.param(i, "weight")?, *stride)?
                .add_channel(self.param(i, "bias")?)?,
            LayerSpec::MaxPool2d { pool, stride } => nn::max_pool2d(h, *pool, *stride)?,
            LayerSpec::BatchNorm { .. } => return self.batch_norm(i, h, mode),
            LayerSpec::LeakyRelu { alpha } => h.leaky_relu(*alpha),
            LayerSpec::Relu => h.relu(),
            LayerSpec::Tanh => h.tanh(),
            LayerSpec::Sigmoid => h.sigmoid(),
            LayerSpec::PhaseShuffle { radius } => match mode {
                Mode::Train => nn::phase_shuffle(h, *radius, &mut self.shuffle_rng)?,
                Mode::Infer => h.clone(),
            },
            LayerSpec::Crop { target } => nn::crop(h, *target)?,
            LayerSpec::Reshape { shape } => {
                let mut full = vec![h.shape()[0]];
                full.extend_from_slice(shape);
                h.reshape(&full)?
            }
        };
        Ok(out)
    }

    fn batch_norm(&mut self, i: usize, h: &Tensor, mode: Mode) -> Result<Tensor> {
        let prefix = &self.names[i];
        let mean_name = format!("{prefix}.running_mean");
        let var_name = format!("{prefix}.running_var");
        let mut stats = RunningStats {
            mean: self.params.get(&mean_name)?.to_vec(),
            var: self.params.get(&var_name)?.to_vec(),
        };
        let norm_mode = match mode {
            Mode::Train => NormMode::Train,
            Mode::Infer => NormMode::Infer,
        };
        let out = nn::batch_norm(
            h,
            self.param(i, "gamma")?,
            self.param(i, "beta")?,
            &mut stats,
            norm_mode,
        )?;
        if mode == Mode::Train {
            self.params.set_values(&mean_name, stats.mean)?;
            self.params.set_values(&var_name, stats.var)?;
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(self.params.save(path)?)
    }

    pub fn load(&mut self, path: impl AsRef<Path>) -> Result<()> {
        Ok(self.params.load(path)?)
    }
}

/// Copies the critic's first four convolutions into the denoiser encoder.
/// The decoder keeps its own initialization.
pub fn transfer_critic_to_denoiser(critic: &Network, denoiser: &mut Network) -> Result<()> {
    for (net, kind) in [
        (critic, NetworkKind::Critic),
        (&*denoiser, NetworkKind::Denoiser),
    ] {
        if net.kind() != kind {
            return Err(CoreError::WrongNetwork {
                expected: kind.name(),
                found: net.kind().name(),
            });
        }
    }
    let (dc, dd) = (critic.spec.arch.model_dim, denoiser.spec.arch.model_dim);
    if dc != dd {
        return Err(CoreError::DimMismatch(dc, dd));
    }
    for k in 0..SHARED_CONVS {
        for p in ["weight", "bias"] {
            let value = critic.params.get(&format!("critic.conv{k}.{p}"))?.detach();
            denoiser
                .params
                .set(&format!("denoiser.conv{k}.{p}"), &value)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_names_skip_shuffle_layers() {
        let plain = NetworkSpec::critic(ArchConfig::full_scale(), 0).unwrap();
        let shuffled = NetworkSpec::critic(ArchConfig::full_scale(), 2).unwrap();
        let a = Network::new(plain, 1).unwrap();
        let b = Network::new(shuffled, 1).unwrap();
        let names = |n: &Network| {
            n.params()
                .iter()
                .map(|p| p.name.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(names(&a), names(&b));
        assert!(a.params().contains("critic.conv2.weight"));
        assert!(a.params().contains("critic.dense0.bias"));
    }

    #[test]
    fn full_scale_seed_reaches_8192() {
        let shapes = NetworkSpec::generator(ArchConfig::full_scale())
            .unwrap()
            .output_shapes()
            .unwrap();
        assert!(shapes.contains(&vec![8192, 1]));
        assert_eq!(shapes.last().unwrap(), &vec![5000, 1]);
    }

    #[test]
    fn zero_dimension_is_rejected() {
        let arch = ArchConfig {
            model_dim: 0,
            ..ArchConfig::full_scale()
        };
        assert!(NetworkSpec::generator(arch).is_err());
        let short = ArchConfig {
            seed_len: 1,
            ..ArchConfig::full_scale()
        };
        assert!(NetworkSpec::generator(short).is_err());
    }

    #[test]
    fn desk_arch_seed_covers_length() {
        let a = ArchConfig::for_length(4, 100, 512);
        assert_eq!(a.seed_len, 1);
        let shapes = NetworkSpec::denoiser(a, 0)
            .unwrap()
            .output_shapes()
            .unwrap();
        assert_eq!(shapes.last().unwrap(), &vec![512, 1]);
    }

    #[test]
    fn parameters_are_counted_once() {
        let spec = NetworkSpec::generator(ArchConfig::full_scale()).unwrap();
        let expected = spec.count_params();
        let net = Network::new(spec, 3).unwrap();
        assert_eq!(net.count_params(), expected);
        assert_eq!(
            net.params().get("generator.dense0.weight").unwrap().shape(),
            &[100, 2048]
        );
    }
}
