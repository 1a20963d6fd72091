//! Multi-label classifier training on Mel spectrograms.

use ecg_tensor::nn::binary_cross_entropy;
use ecg_tensor::{no_grad, AdamConfig, AdamState, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::log::{EpochRecord, Phase, TrainLog};
use super::{check_positive, holdout, optimizer_step};
use crate::dsp::{mel_spectrogram, FRAMES, MEL_BANDS};
use crate::error::{CoreError, Result};
use crate::models::{Mode, Network, NetworkSpec};
use crate::signal::{LabeledDataset, LABEL_COUNT};

const CELLS: usize = FRAMES * MEL_BANDS;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    /// Share of the data held out for checkpoint selection. Zero selects on
    /// the training data itself.
    pub validation_fraction: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            batch_size: 64,
            epochs: 100,
            adam: AdamConfig::default(),
            validation_fraction: 0.1,
        }
    }
}

fn gather(
    features: &[Vec<f64>],
    targets: &[[f64; LABEL_COUNT]],
    idx: &[usize],
) -> Result<(Tensor, Tensor)> {
    let mut x = Vec::with_capacity(idx.len() * CELLS);
    let mut y = Vec::with_capacity(idx.len() * LABEL_COUNT);
    for &i in idx {
        x.extend_from_slice(&features[i]);
        y.extend_from_slice(&targets[i]);
    }
    Ok((
        Tensor::new(&[idx.len(), FRAMES, MEL_BANDS, 1], x)?,
        Tensor::new(&[idx.len(), LABEL_COUNT], y)?,
    ))
}

/// Trains the label classifier with mean binary cross-entropy and returns
/// the parameters of the epoch with the lowest validation loss.
pub fn train_inception(
    ds: &LabeledDataset,
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<(Network, TrainLog)> {
    check_positive(&[("batch_size", cfg.batch_size), ("epochs", cfg.epochs)])?;
    if ds.len() < 2 {
        return Err(CoreError::InsufficientData {
            needed: 2,
            available: ds.len(),
        });
    }
    let features = ds
        .signals()
        .iter()
        .map(|s| Ok(mel_spectrogram(s)?.bins))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<[f64; LABEL_COUNT]> = ds
        .labels()
        .iter()
        .map(|l| l.map(|b| if b { 1.0 } else { 0.0 }))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val) = holdout(ds.len(), cfg.validation_fraction, &mut rng)?;
    if val.is_empty() {
        val = train.clone();
    }
    let batch = cfg.batch_size.min(train.len());
    if batch < 2 {
        return Err(CoreError::InsufficientData {
            needed: 2,
            available: train.len(),
        });
    }
    let mut net = Network::new(NetworkSpec::inception(), rng.random())?;
    let mut opt = AdamState::new(&net.params().trainable(), cfg.adam);
    let (val_x, val_y) = gather(&features, &targets, &val)?;
    let mut log = TrainLog::default();
    let mut best: Option<(f64, Network)> = None;

    for epoch in 0..cfg.epochs {
        train.shuffle(&mut rng);
        let mut losses = Vec::new();
        for idx in train.chunks_exact(batch) {
            let (x, y) = gather(&features, &targets, idx)?;
            let loss = binary_cross_entropy(&net.forward(&x, Mode::Train)?, &y)?;
            optimizer_step(&mut net, &loss, &mut opt)?;
            let value = loss.item()?;
            log.push_step(epoch, Phase::Fit, value, None, None);
            losses.push(value);
        }
        let val_loss = {
            let _guard = no_grad();
            binary_cross_entropy(&net.forward(&val_x, Mode::Infer)?, &val_y)?.item()?
        };
        log.epochs.push(EpochRecord {
            epoch,
            train_loss: losses.iter().sum::<f64>() / losses.len() as f64,
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
