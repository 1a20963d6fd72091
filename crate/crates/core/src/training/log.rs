//! Per-step and per-epoch training records.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Critic,
    Generator,
    /// A supervised step (classifier or denoiser).
    Fit,
}

/// One optimizer step. `loss` is the objective that step minimized;
/// `wasserstein` and `gp` are only present on critic steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: usize,
    pub phase: Phase,
    pub loss: f64,
    pub wasserstein: Option<f64>,
    pub gp: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub inception_score: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, when selection applies.
    pub selected_epoch: Option<usize>,
}

impl TrainLog {
    pub(crate) fn push_step(
        &mut self,
        epoch: usize,
        phase: Phase,
        loss: f64,
        wasserstein: Option<f64>,
        gp: Option<f64>,
    ) {
        self.steps.push(StepRecord {
            step: self.steps.len() as u64,
            epoch,
            phase,
            loss,
            wasserstein,
            gp,
        });
    }

    pub fn count(&self, phase: Phase) -> usize {
        self.steps.iter().filter(|s| s.phase == phase).count()
    }

    /// Mean critic Wasserstein estimate over the critic steps preceding each
    /// generator step.
    pub fn wasserstein_per_generator_step(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut pending = Vec::new();
        for s in &self.steps {
            match s.phase {
                Phase::Critic => pending.extend(s.wasserstein),
                Phase::Generator if !pending.is_empty() => {
                    out.push(pending.iter().sum::<f64>() / pending.len() as f64);
                    pending.clear();
                }
                _ => {}
            }
        }
        out
    }

    /// Critic steps between consecutive generator steps (and before the
    /// first one).
    pub fn critic_runs(&self) -> Vec<usize> {
        let mut runs = Vec::new();
        let mut current = 0;
        for s in &self.steps {
            match s.phase {
                Phase::Critic => current += 1,
                Phase::Generator => {
                    runs.push(current);
                    current = 0;
                }
                Phase::Fit => {}
            }
        }
        runs
    }

    pub fn write_steps_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(&self.steps, w)
    }

    pub fn write_epochs_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows(&self.epochs, w)
    }
}

fn write_rows<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
