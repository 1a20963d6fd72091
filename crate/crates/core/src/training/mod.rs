//! Training loops for the four networks and the training-set-size sweep.

mod ablation;
mod denoiser;
mod gan;
mod inception;
mod log;

pub use ablation::{ablation_sweep, write_ablation_csv, AblationData, AblationRow, Composition};
pub use denoiser::{train_denoiser, DenoiserConfig, DenoiserVariant};
pub use gan::{gradient_penalty, train_gan, GanConfig, GanOutcome};
pub use inception::{train_inception, ClassifierConfig};
pub use log::{EpochRecord, Phase, StepRecord, TrainLog};

use ecg_tensor::{adam_step, grad, AdamState, Tensor};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::models::Network;
use crate::signal::Signal;

/// Shuffled indices split into `(train, validation)`. A positive fraction
/// always holds out at least one item.
pub(crate) fn holdout<R: Rng + ?Sized>(
    n: usize,
    fraction: f64,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(CoreError::InvalidParameter(format!(
            "validation fraction {fraction} outside [0, 1)"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut held = (n as f64 * fraction).round() as usize;
    if fraction > 0.0 && n > 1 {
        held = held.max(1);
    }
    let val = idx.split_off(n - held);
    Ok((idx, val))
}

/// Stacks equal-length signals into `[n, len, 1]`.
pub(crate) fn stack<'a>(
    signals: impl IntoIterator<Item = &'a Signal>,
    len: usize,
) -> Result<Tensor> {
    let mut data = Vec::new();
    let mut n = 0;
    for s in signals {
        if s.len() != len {
            return Err(CoreError::LengthMismatch(len, s.len()));
        }
        data.extend_from_slice(s.samples());
        n += 1;
    }
    Ok(Tensor::new(&[n, len, 1], data)?)
}

/// Back-propagates `loss` into `net`'s trainable parameters and applies
/// one Adam update.
pub(crate) fn optimizer_step(
    net: &mut Network,
    loss: &Tensor,
    state: &mut AdamState,
) -> Result<()> {
    let params = net.params().trainable();
    let grads = grad(loss, &params, false)?;
    let updated = adam_step(&params, &grads, state)?;
    net.params_mut().replace_trainable(updated)?;
    Ok(())
}

pub(crate) fn check_positive(fields: &[(&str, usize)]) -> Result<()> {
    match fields.iter().find(|(_, v)| *v == 0) {
        Some((name, _)) => Err(CoreError::InvalidParameter(format!(
            "{name} must be positive"
        ))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn holdout_partitions_indices() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (train, val) = holdout(25, 0.1, &mut rng).unwrap();
        assert_eq!((train.len(), val.len()), (22, 3));
        let mut all: Vec<usize> = train.iter().chain(&val).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..25).collect::<Vec<_>>());
        let (train, val) = holdout(8, 0.0, &mut rng).unwrap();
        assert_eq!((train.len(), val.len()), (8, 0));
        assert!(holdout(8, 1.0, &mut rng).is_err());
    }
}
