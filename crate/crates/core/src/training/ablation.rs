//! Denoiser quality as a function of training-set size and composition.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::denoiser::{train_denoiser, DenoiserConfig, DenoiserVariant};
use crate::error::{CoreError, Result};
use crate::evaluation::{evaluate_denoiser, Method, MetricReport};
use crate::signal::SignalPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    RealOnly,
    SyntheticOnly,
    /// Half real, half synthetic (the odd one synthetic), shuffled together.
    Mixed,
}

impl Composition {
    pub fn name(self) -> &'static str {
        match self {
            Composition::RealOnly => "real_only",
            Composition::SyntheticOnly => "synthetic_only",
            Composition::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AblationData<'a> {
    pub real_train: &'a [SignalPair],
    pub synthetic_train: &'a [SignalPair],
    pub real_test: &'a [SignalPair],
    pub synthetic_test: &'a [SignalPair],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub composition: Composition,
    pub size: usize,
    pub real: MetricReport,
    pub synthetic: MetricReport,
}

fn take(pool: &[SignalPair], n: usize) -> Result<&[SignalPair]> {
    pool.get(..n).ok_or(CoreError::InsufficientData {
        needed: n,
        available: pool.len(),
    })
}

fn training_set(
    data: &AblationData<'_>,
    composition: Composition,
    size: usize,
    seed: u64,
) -> Result<Vec<SignalPair>> {
    Ok(match composition {
        Composition::RealOnly => take(data.real_train, size)?.to_vec(),
        Composition::SyntheticOnly => take(data.synthetic_train, size)?.to_vec(),
        Composition::Mixed => {
            let mut mixed = take(data.real_train, size / 2)?.to_vec();
            mixed.extend_from_slice(take(data.synthetic_train, size - size / 2)?);
            mixed.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            mixed
        }
    })
}

/// Trains one baseline denoiser per `(composition, size)` on the leading
/// pairs of each pool and evaluates it on both test sets. Rows come back
/// sorted by composition, then size.
pub fn ablation_sweep(
    data: &AblationData<'_>,
    compositions: &[Composition],
    sizes: &[usize],
    cfg: &DenoiserConfig,
    seed: u64,
) -> Result<Vec<AblationRow>> {
    let mut plan: Vec<(Composition, usize)> = compositions
        .iter()
        .flat_map(|&c| sizes.iter().map(move |&s| (c, s)))
        .collect();
    plan.sort_unstable();
    plan.dedup();
    // Check every size before spending time on training.
    for &(c, s) in &plan {
        training_set(data, c, s, seed)?;
    }
    let mut rows = Vec::with_capacity(plan.len());
    for (composition, size) in plan {
        let train = training_set(data, composition, size, seed)?;
        let (mut net, _) = train_denoiser(&train, cfg, DenoiserVariant::Baseline, seed)?;
        let tag = format!("{}/{size}", composition.name());
        let mut method = Method::Denoiser(&mut net);
        let real = evaluate_denoiser(&mut method, data.real_test, &format!("{tag}/real"))?;
        let synthetic = evaluate_denoiser(
            &mut method,
            data.synthetic_test,
            &format!("{tag}/synthetic"),
        )?;
        rows.push(AblationRow {
            composition,
            size,
            real,
            synthetic,
        });
    }
    Ok(rows)
}

#[derive(Serialize)]
struct CsvRow {
    composition: &'static str,
    size: usize,
    real_mse: f64,
    real_snr_db: f64,
    real_delta_hr_hz: f64,
    synthetic_mse: f64,
    synthetic_snr_db: f64,
    synthetic_delta_hr_hz: f64,
}

pub fn write_ablation_csv<W: Write>(rows: &[AblationRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(CsvRow {
            composition: r.composition.name(),
            size: r.size,
            real_mse: r.real.mse,
            real_snr_db: r.real.snr_db,
            real_delta_hr_hz: r.real.delta_hr_hz,
            synthetic_mse: r.synthetic.mse,
            synthetic_snr_db: r.synthetic.snr_db,
            synthetic_delta_hr_hz: r.synthetic.delta_hr_hz,
        })?;
    }
    out.flush()?;
    Ok(())
}
