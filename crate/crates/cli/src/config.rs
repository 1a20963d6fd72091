use std::path::Path;

use anyhow::{Context, Result};
use ecg_core::models::ArchConfig;
use ecg_core::synthesis::NoiseRanges;
use ecg_core::training::{ClassifierConfig, DenoiserConfig, GanConfig};
use ecg_tensor::{AdamConfig, LatentDistribution};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Latent {
    Uniform,
    Normal,
}

/// Run configuration read from a TOML key-value file. Every key is
/// optional; a missing key keeps the full-scale training value.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub batch_size: usize,
    pub model_dim: usize,
    pub gp_lambda: f64,
    pub critic_updates: usize,
    pub phase_shuffle: usize,
    pub adam_lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,

    pub latent_len: usize,
    pub latent: Latent,
    pub gan_epochs: usize,
    pub classifier_epochs: usize,
    pub denoiser_epochs: usize,
    pub max_steps: Option<usize>,
    pub validation_fraction: f64,
    pub score_every: usize,
    pub score_batch: usize,
    pub score_splits: usize,

    pub gamma: f64,
    pub bw_freq_max_hz: f64,
    pub bw_amp_max: f64,
    pub pl_amp_max: f64,
    pub pl_freq_hz: f64,
    pub chirp_amp_max: f64,
    pub chirp_f0_hz: f64,
    pub chirp_f1_hz: f64,
    pub chirp_mod_min_hz: f64,
    pub chirp_mod_max_hz: f64,

    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let gan = GanConfig::default();
        let noise = NoiseRanges::default();
        RunConfig {
            batch_size: gan.batch_size,
            model_dim: gan.arch.model_dim,
            gp_lambda: gan.gp_lambda,
            critic_updates: gan.critic_updates,
            phase_shuffle: gan.phase_shuffle,
            adam_lr: gan.adam.lr,
            adam_beta1: gan.adam.beta1,
            adam_beta2: gan.adam.beta2,
            latent_len: gan.arch.latent_len,
            latent: Latent::Uniform,
            gan_epochs: gan.epochs,
            classifier_epochs: ClassifierConfig::default().epochs,
            denoiser_epochs: DenoiserConfig::default().epochs,
            max_steps: None,
            validation_fraction: gan.validation_fraction,
            score_every: gan.score_every,
            score_batch: gan.score_batch,
            score_splits: gan.score_splits,
            gamma: 1.0,
            bw_freq_max_hz: noise.bw_freq_max_hz,
            bw_amp_max: noise.bw_amp_max,
            pl_amp_max: noise.pl_amp_max,
            pl_freq_hz: noise.pl_freq_hz,
            chirp_amp_max: noise.chirp_amp_max,
            chirp_f0_hz: noise.chirp_f0_hz,
            chirp_f1_hz: noise.chirp_f1_hz,
            chirp_mod_min_hz: noise.chirp_mod_min_hz,
            chirp_mod_max_hz: noise.chirp_mod_max_hz,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                // toml errors span several lines; keep only the message.
                RunConfig::parse(&text).map_err(|e| {
                    let msg = e
                        .to_string()
                        .lines()
                        .last()
                        .unwrap_or_default()
                        .trim()
                        .to_string();
                    anyhow::anyhow!("config {}: {msg}", p.display())
                })
            }
        }
    }

    /// Networks sized for `signal_len`; 5000-sample signals get the
    /// full-size generator seed.
    pub fn arch(&self, signal_len: usize) -> ArchConfig {
        if signal_len == ArchConfig::full_scale().signal_len {
            ArchConfig {
                model_dim: self.model_dim,
                latent_len: self.latent_len,
                ..ArchConfig::full_scale()
            }
        } else {
            ArchConfig::for_length(self.model_dim, self.latent_len, signal_len)
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.adam_lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            ..AdamConfig::default()
        }
    }

    pub fn latent_distribution(&self) -> LatentDistribution {
        match self.latent {
            Latent::Uniform => LatentDistribution::Uniform,
            Latent::Normal => LatentDistribution::Normal,
        }
    }

    pub fn noise_ranges(&self) -> NoiseRanges {
        NoiseRanges {
            bw_freq_max_hz: self.bw_freq_max_hz,
            bw_amp_max: self.bw_amp_max,
            pl_amp_max: self.pl_amp_max,
            pl_freq_hz: self.pl_freq_hz,
            chirp_amp_max: self.chirp_amp_max,
            chirp_f0_hz: self.chirp_f0_hz,
            chirp_f1_hz: self.chirp_f1_hz,
            chirp_mod_min_hz: self.chirp_mod_min_hz,
            chirp_mod_max_hz: self.chirp_mod_max_hz,
        }
    }

    pub fn gan(&self, signal_len: usize) -> GanConfig {
        GanConfig {
            batch_size: self.batch_size,
            arch: self.arch(signal_len),
            gp_lambda: self.gp_lambda,
            critic_updates: self.critic_updates,
            phase_shuffle: self.phase_shuffle,
            adam: self.adam(),
            epochs: self.gan_epochs,
            max_generator_steps: self.max_steps,
            latent: self.latent_distribution(),
            validation_fraction: self.validation_fraction,
            score_every: self.score_every,
            score_batch: self.score_batch,
            score_splits: self.score_splits,
        }
    }

    pub fn classifier(&self) -> ClassifierConfig {
        ClassifierConfig {
            batch_size: self.batch_size,
            epochs: self.classifier_epochs,
            adam: self.adam(),
            validation_fraction: self.validation_fraction,
        }
    }

    pub fn denoiser(&self, signal_len: usize) -> DenoiserConfig {
        DenoiserConfig {
            batch_size: self.batch_size,
            arch: self.arch(signal_len),
            adam: self.adam(),
            epochs: self.denoiser_epochs,
            max_steps: self.max_steps,
            phase_shuffle: self.phase_shuffle,
            validation_fraction: self.validation_fraction,
        }
    }
}
