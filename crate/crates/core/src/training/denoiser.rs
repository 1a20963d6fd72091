//! Denoising autoencoder training on clean/noisy pairs.

use ecg_tensor::nn::mse_loss;
use ecg_tensor::{no_grad, AdamConfig, AdamState};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::log::{EpochRecord, Phase, TrainLog};
use super::{check_positive, holdout, optimizer_step, stack};
use crate::error::{CoreError, Result};
use crate::models::{transfer_critic_to_denoiser, ArchConfig, Mode, Network, NetworkSpec};
use crate::signal::SignalPair;

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserConfig {
    pub batch_size: usize,
    pub arch: ArchConfig,
    pub adam: AdamConfig,
    pub epochs: usize,
    /// Stops early after this many optimizer steps.
    pub max_steps: Option<usize>,
    /// Shuffle radius of the phase-shuffle variant.
    pub phase_shuffle: usize,
    pub validation_fraction: f64,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        DenoiserConfig {
            batch_size: 64,
            arch: ArchConfig::full_scale(),
            adam: AdamConfig::default(),
            epochs: 100,
            max_steps: None,
            phase_shuffle: 2,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum DenoiserVariant<'a> {
    Baseline,
    /// Phase shuffle before each encoder convolution.
    PhaseShuffle,
    /// Encoder initialized from a trained critic.
    Pretrained(&'a Network),
}

fn validation_mse(net: &mut Network, pairs: &[&SignalPair], len: usize) -> Result<f64> {
    let _guard = no_grad();
    let mut total = 0.0;
    for chunk in pairs.chunks(64) {
        let x = stack(chunk.iter().map(|p| &p.noisy), len)?;
        let y = stack(chunk.iter().map(|p| &p.clean), len)?;
        total += mse_loss(&net.forward(&x, Mode::Infer)?, &y)?.item()? * chunk.len() as f64;
    }
    Ok(total / pairs.len() as f64)
}

/// Fits the denoiser to map noisy signals to clean ones under mean squared
/// error, keeping the parameters of the epoch with the lowest validation
/// loss. Validation runs after every epoch and when `max_steps` stops a run
/// mid-epoch.
pub fn train_denoiser(
    pairs: &[SignalPair],
    cfg: &DenoiserConfig,
    variant: DenoiserVariant<'_>,
    seed: u64,
) -> Result<(Network, TrainLog)> {
    check_positive(&[("batch_size", cfg.batch_size), ("epochs", cfg.epochs)])?;
    let len = cfg.arch.signal_len;
    if let Some(bad) = pairs.iter().find(|p| p.clean.len() != len) {
        return Err(CoreError::LengthMismatch(len, bad.clean.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, val) = holdout(pairs.len(), cfg.validation_fraction, &mut rng)?;
    if train.is_empty() {
        return Err(CoreError::InsufficientData {
            needed: 1,
            available: 0,
        });
    }
    let val: Vec<&SignalPair> = if val.is_empty() {
        train.iter().map(|&i| &pairs[i]).collect()
    } else {
        val.iter().map(|&i| &pairs[i]).collect()
    };
    let radius = match variant {
        DenoiserVariant::PhaseShuffle => cfg.phase_shuffle,
        _ => 0,
    };
    let mut net = Network::new(NetworkSpec::denoiser(cfg.arch, radius)?, rng.random())?;
    if let DenoiserVariant::Pretrained(critic) = variant {
        transfer_critic_to_denoiser(critic, &mut net)?;
    }
    let mut opt = AdamState::new(&net.params().trainable(), cfg.adam);
    let batch = cfg.batch_size.min(train.len());
    let mut log = TrainLog::default();
    let mut best: Option<(f64, Network)> = None;
    let mut steps = 0;
    let done = |steps: usize| cfg.max_steps.is_some_and(|m| steps >= m);

    for epoch in 0..cfg.epochs {
        if done(steps) {
            break;
        }
        train.shuffle(&mut rng);
        let mut losses = Vec::new();
        for idx in train.chunks_exact(batch) {
            let x = stack(idx.iter().map(|&i| &pairs[i].noisy), len)?;
            let y = stack(idx.iter().map(|&i| &pairs[i].clean), len)?;
            let loss = mse_loss(&net.forward(&x, Mode::Train)?, &y)?;
            optimizer_step(&mut net, &loss, &mut opt)?;
            let value = loss.item()?;
            log.push_step(epoch, Phase::Fit, value, None, None);
            losses.push(value);
            steps += 1;
            if done(steps) {
                break;
            }
        }
        let val_loss = validation_mse(&mut net, &val, len)?;
        log.epochs.push(EpochRecord {
            epoch,
            train_loss: losses.iter().sum::<f64>() / losses.len().max(1) as f64,
            val_loss: Some(val_loss),
            inception_score: None,
        });
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, net.clone()));
            log.selected_epoch = Some(epoch);
        }
    }
    let net = best.map_or(net, |(_, n)| n);
    Ok((net, log))
}
