//! Wasserstein GAN training with a gradient penalty.

use ecg_tensor::{grad, no_grad, AdamConfig, AdamState, LatentDistribution, Tensor, TensorError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::log::{EpochRecord, Phase, TrainLog};
use super::{check_positive, holdout, optimizer_step, stack};
use crate::error::{CoreError, Result};
use crate::evaluation::{classify, inception_score};
use crate::models::{ArchConfig, Mode, Network, NetworkKind, NetworkSpec};
use crate::signal::Signal;

/// Added under the square root of the gradient norm so its derivative stays
/// finite at zero.
const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GanConfig {
    pub batch_size: usize,
    pub arch: ArchConfig,
    pub gp_lambda: f64,
    pub critic_updates: usize,
    pub phase_shuffle: usize,
    pub adam: AdamConfig,
    pub epochs: usize,
    /// Stops early once this many generator updates have run.
    pub max_generator_steps: Option<usize>,
    pub latent: LatentDistribution,
    pub validation_fraction: f64,
    /// Inception-score selection period in epochs; only used when a
    /// classifier is supplied.
    pub score_every: usize,
    pub score_batch: usize,
    pub score_splits: usize,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            batch_size: 64,
            arch: ArchConfig::full_scale(),
            gp_lambda: 10.0,
            critic_updates: 5,
            phase_shuffle: 2,
            adam: AdamConfig::default(),
            epochs: 1000,
            max_generator_steps: None,
            latent: LatentDistribution::Uniform,
            validation_fraction: 0.1,
            score_every: 10,
            score_batch: 1024,
            score_splits: 10,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive(&[
            ("batch_size", self.batch_size),
            ("critic_updates", self.critic_updates),
            ("epochs", self.epochs),
            ("score_every", self.score_every),
            ("score_batch", self.score_batch),
            ("score_splits", self.score_splits),
        ])?;
        if self.batch_size < 2 {
            return Err(CoreError::InvalidParameter(
                "batch_size must be at least 2".into(),
            ));
        }
        if !(self.gp_lambda >= 0.0 && self.gp_lambda.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "gp_lambda {}",
                self.gp_lambda
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GanOutcome {
    pub generator: Network,
    pub critic: Network,
    pub log: TrainLog,
}

/// Mean over the batch of `(‖∇ critic(x̂)‖₂ − 1)²`, where
/// `x̂ = α·real + (1 − α)·fake` with one `α` per sample. The result stays
/// differentiable with respect to the critic's parameters.
pub fn gradient_penalty<F>(
    mut critic: F,
    real: &Tensor,
    fake: &Tensor,
    alpha: &[f64],
) -> Result<Tensor>
where
    F: FnMut(&Tensor) -> Result<Tensor>,
{
    if real.shape() != fake.shape() {
        return Err(CoreError::Tensor(TensorError::ShapeMismatch {
            op: "gradient_penalty",
            lhs: real.shape().to_vec(),
            rhs: fake.shape().to_vec(),
        }));
    }
    let n = real.shape()[0];
    if alpha.len() != n {
        return Err(CoreError::LengthMismatch(n, alpha.len()));
    }
    let per = real.numel() / n.max(1);
    let mixed: Vec<f64> = real
        .data()
        .chunks(per)
        .zip(fake.data().chunks(per))
        .zip(alpha)
        .flat_map(|((r, f), a)| r.iter().zip(f).map(move |(r, f)| a * r + (1.0 - a) * f))
        .collect();
    let x_hat = Tensor::new(real.shape(), mixed)?.requiring_grad();
    let score = critic(&x_hat)?.sum();
    let g = grad(&score, &[x_hat], true)?.remove(0);
    let norms = g
        .reshape(&[n, per])?
        .square()
        .matmul(&Tensor::ones(&[per, 1]))?
        .add_scalar(NORM_EPS)
        .sqrt();
    Ok(norms.add_scalar(-1.0).square().mean())
}

struct Session<'a> {
    cfg: &'a GanConfig,
    generator: Network,
    critic: Network,
    g_opt: AdamState,
    c_opt: AdamState,
    latent_rng: ChaCha8Rng,
    mix_rng: ChaCha8Rng,
    log: TrainLog,
}

impl Session<'_> {
    fn latent(&mut self, n: usize) -> Tensor {
        self.cfg
            .latent
            .sample(n, self.cfg.arch.latent_len, &mut self.latent_rng)
    }

    fn critic_step(&mut self, real: &Tensor, epoch: usize) -> Result<f64> {
        let n = real.shape()[0];
        let z = self.latent(n);
        let fake = {
            let _guard = no_grad();
            self.generator.forward(&z, Mode::Train)?
        };
        let alpha: Vec<f64> = (0..n).map(|_| self.mix_rng.random::<f64>()).collect();
        let c_real = self.critic.forward(real, Mode::Train)?.mean();
        let c_fake = self.critic.forward(&fake, Mode::Train)?.mean();
        let critic = &mut self.critic;
        let gp = gradient_penalty(|x| critic.forward(x, Mode::Train), real, &fake, &alpha)?;
        let loss = c_fake.sub(&c_real)?.add(&gp.scale(self.cfg.gp_lambda))?;
        optimizer_step(&mut self.critic, &loss, &mut self.c_opt)?;
        let wasserstein = c_real.item()? - c_fake.item()?;
        let value = loss.item()?;
        self.log.push_step(
            epoch,
            Phase::Critic,
            value,
            Some(wasserstein),
            Some(gp.item()?),
        );
        Ok(value)
    }

    fn generator_step(&mut self, epoch: usize) -> Result<()> {
        let z = self.latent(self.cfg.batch_size);
        let fake = self.generator.forward(&z, Mode::Train)?;
        let loss = self.critic.forward(&fake, Mode::Train)?.mean().neg();
        optimizer_step(&mut self.generator, &loss, &mut self.g_opt)?;
        self.log
            .push_step(epoch, Phase::Generator, loss.item()?, None, None);
        Ok(())
    }

    fn generate(&mut self, z: &Tensor, rate: f64) -> Result<Vec<Signal>> {
        let _guard = no_grad();
        let len = self.cfg.arch.signal_len;
        let mut out = Vec::with_capacity(z.shape()[0]);
        for chunk in z
            .data()
            .chunks(self.cfg.batch_size * self.cfg.arch.latent_len)
        {
            let rows = chunk.len() / self.cfg.arch.latent_len;
            let zc = Tensor::new(&[rows, self.cfg.arch.latent_len], chunk.to_vec())?;
            let y = self.generator.forward(&zc, Mode::Infer)?;
            for row in y.data().chunks(len) {
                out.push(Signal::new(row.to_vec(), rate)?);
            }
        }
        Ok(out)
    }

    /// Critic objective without the penalty on held-out real signals.
    fn validation_loss(&mut self, val: &[&Signal], z: &Tensor) -> Result<f64> {
        let _guard = no_grad();
        let real = stack(val.iter().copied(), self.cfg.arch.signal_len)?;
        let fake = self.generator.forward(z, Mode::Infer)?;
        let c_real = self.critic.forward(&real, Mode::Infer)?.mean().item()?;
        let c_fake = self.critic.forward(&fake, Mode::Infer)?.mean().item()?;
        Ok(c_fake - c_real)
    }
}

/// Trains a generator and critic on `real`, with `critic_updates` critic
/// steps per generator step. An epoch is one pass over the training part of
/// `real` in critic batches, the trailing partial batch dropped.
///
/// With a `classifier`, the inception score of a fixed generated batch is
/// computed every `score_every` epochs and the best-scoring pair of networks
/// is returned; otherwise the final networks are.
pub fn train_gan(
    real: &[Signal],
    cfg: &GanConfig,
    seed: u64,
    mut classifier: Option<&mut Network>,
) -> Result<GanOutcome> {
    cfg.validate()?;
    let len = cfg.arch.signal_len;
    if let Some(bad) = real.iter().find(|s| s.len() != len) {
        return Err(CoreError::LengthMismatch(len, bad.len()));
    }
    let rate = real.first().map_or(1.0, Signal::sample_rate_hz);
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let (train_idx, val_idx) = holdout(real.len(), cfg.validation_fraction, &mut master)?;
    if train_idx.len() < cfg.batch_size {
        return Err(CoreError::InsufficientData {
            needed: cfg.batch_size,
            available: train_idx.len(),
        });
    }
    if let Some(c) = classifier.as_deref() {
        if c.kind() != NetworkKind::Inception {
            return Err(CoreError::WrongNetwork {
                expected: NetworkKind::Inception.name(),
                found: c.kind().name(),
            });
        }
    }

    let generator = Network::new(NetworkSpec::generator(cfg.arch)?, master.random())?;
    let critic = Network::new(
        NetworkSpec::critic(cfg.arch, cfg.phase_shuffle)?,
        master.random(),
    )?;
    let mut data_rng = ChaCha8Rng::seed_from_u64(master.random());
    let mut probe_rng = ChaCha8Rng::seed_from_u64(master.random());
    let mut s = Session {
        cfg,
        g_opt: AdamState::new(&generator.params().trainable(), cfg.adam),
        c_opt: AdamState::new(&critic.params().trainable(), cfg.adam),
        generator,
        critic,
        latent_rng: ChaCha8Rng::seed_from_u64(master.random()),
        mix_rng: ChaCha8Rng::seed_from_u64(master.random()),
        log: TrainLog::default(),
    };
    let val: Vec<&Signal> = val_idx.iter().map(|&i| &real[i]).collect();
    let val_z = cfg
        .latent
        .sample(val.len(), cfg.arch.latent_len, &mut probe_rng);
    let score_z = cfg
        .latent
        .sample(cfg.score_batch, cfg.arch.latent_len, &mut probe_rng);

    let mut order = train_idx;
    let mut since_generator = 0;
    let mut generator_steps = 0;
    let mut best: Option<(f64, Network, Network)> = None;
    let done = |steps: usize| cfg.max_generator_steps.is_some_and(|m| steps >= m);

    for epoch in 0..cfg.epochs {
        if done(generator_steps) {
            break;
        }
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut data_rng);
        let mut losses = Vec::new();
        for batch in order.chunks_exact(cfg.batch_size) {
            let x = stack(batch.iter().map(|&i| &real[i]), len)?;
            losses.push(s.critic_step(&x, epoch)?);
            since_generator += 1;
            if since_generator == cfg.critic_updates {
                s.generator_step(epoch)?;
                since_generator = 0;
                generator_steps += 1;
                if done(generator_steps) {
                    break;
                }
            }
        }
        let val_loss = if val.is_empty() {
            None
        } else {
            Some(s.validation_loss(&val, &val_z)?)
        };
        let mut score = None;
        if let Some(c) = classifier.as_deref_mut() {
            if (epoch + 1) % cfg.score_every == 0
                || done(generator_steps)
                || epoch + 1 == cfg.epochs
            {
                let generated = s.generate(&score_z, rate)?;
                let probs = classify(c, &generated)?;
                let (mean, _) = inception_score(&probs, cfg.score_splits.min(probs.len()))?;
                score = Some(mean);
                if best.as_ref().is_none_or(|(b, _, _)| mean > *b) {
                    best = Some((mean, s.generator.clone(), s.critic.clone()));
                    s.log.selected_epoch = Some(epoch);
                }
            }
        }
        s.log.epochs.push(EpochRecord {
            epoch,
            train_loss: losses.iter().sum::<f64>() / losses.len().max(1) as f64,
            val_loss,
            inception_score: score,
        });
    }

    let (generator, critic) = match best {
        Some((_, g, c)) => (g, c),
        None => (s.generator, s.critic),
    };
    Ok(GanOutcome {
        generator,
        critic,
        log: s.log,
    })
}
