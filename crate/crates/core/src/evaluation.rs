//! Dataset-quality and denoising metrics, and their CSV report rows.

use std::io::{Read, Write};

use ecg_tensor::{no_grad, Tensor};
use serde::{Deserialize, Serialize};

use crate::dsp::{bandpass_filter, detect_qrs, mel_spectrogram, wavelet_filter, FRAMES, MEL_BANDS};
use crate::error::{CoreError, Result};
use crate::models::{Mode, Network, NetworkKind};
use crate::signal::{Signal, SignalPair, LABEL_COUNT};

pub const DEFAULT_IS_SPLITS: usize = 10;
/// Batch size for inference-only passes.
const EVAL_BATCH: usize = 64;

/// Classifier outputs for one signal.
pub type LabelProbs = [f64; LABEL_COUNT];

fn kl_score(rows: &[LabelProbs]) -> f64 {
    let mut marginal = [0.0; LABEL_COUNT];
    for r in rows {
        for (m, p) in marginal.iter_mut().zip(r) {
            *m += p / rows.len() as f64;
        }
    }
    let mean_kl = rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&marginal)
                .filter(|(p, _)| **p > 0.0)
                .map(|(p, q)| p * (p / q).ln())
                .sum::<f64>()
        })
        .sum::<f64>()
        / rows.len() as f64;
    mean_kl.exp()
}

/// Inception score of classifier outputs: each row is normalized to sum to
/// one, the rows are cut into `splits` contiguous groups, and the mean and
/// population standard deviation of the per-group scores are returned.
pub fn inception_score(probs: &[LabelProbs], splits: usize) -> Result<(f64, f64)> {
    if splits == 0 {
        return Err(CoreError::InvalidParameter(
            "inception score needs at least one split".into(),
        ));
    }
    if probs.len() < splits {
        return Err(CoreError::InsufficientData {
            needed: splits,
            available: probs.len(),
        });
    }
    let mut rows = Vec::with_capacity(probs.len());
    for (i, r) in probs.iter().enumerate() {
        if r.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(CoreError::InvalidParameter(format!(
                "probability row {i} outside [0, 1]"
            )));
        }
        let total: f64 = r.iter().sum();
        if total <= 0.0 {
            return Err(CoreError::ZeroRow(i));
        }
        rows.push(r.map(|p| p / total));
    }
    let n = rows.len();
    let scores: Vec<f64> = (0..splits)
        .map(|k| kl_score(&rows[k * n / splits..(k + 1) * n / splits]))
        .collect();
    let mean = scores.iter().sum::<f64>() / splits as f64;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / splits as f64;
    Ok((mean, var.sqrt()))
}

/// Runs the label classifier over the Mel spectrograms of `signals`.
pub fn classify(classifier: &mut Network, signals: &[Signal]) -> Result<Vec<LabelProbs>> {
    expect_kind(classifier, NetworkKind::Inception)?;
    let _guard = no_grad();
    let mut out = Vec::with_capacity(signals.len());
    for chunk in signals.chunks(EVAL_BATCH) {
        let mut bins = Vec::with_capacity(chunk.len() * FRAMES * MEL_BANDS);
        for s in chunk {
            bins.extend(mel_spectrogram(s)?.bins);
        }
        let x = Tensor::new(&[chunk.len(), FRAMES, MEL_BANDS, 1], bins)?;
        let p = classifier.forward(&x, Mode::Infer)?;
        out.extend(p.data().chunks(LABEL_COUNT).map(|r| {
            let mut row = [0.0; LABEL_COUNT];
            row.copy_from_slice(r);
            row
        }));
    }
    Ok(out)
}

/// Squared distance, abandoned (returning `None`) once it reaches `bound`.
fn squared_distance_below(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += (x - y) * (x - y);
        if acc >= bound {
            return None;
        }
    }
    Some(acc)
}

fn nearest(query: &Signal, pool: &[Signal], skip: Option<usize>) -> Result<f64> {
    let mut best = f64::INFINITY;
    for (j, other) in pool.iter().enumerate() {
        if Some(j) == skip {
            continue;
        }
        if other.len() != query.len() {
            return Err(CoreError::LengthMismatch(query.len(), other.len()));
        }
        if let Some(d) = squared_distance_below(query.samples(), other.samples(), best) {
            best = d;
        }
    }
    Ok(best.sqrt())
}

/// Mean Euclidean distance from each signal to its nearest other signal in
/// the same set.
pub fn nn_distance_self(ds: &[Signal]) -> Result<f64> {
    if ds.len() < 2 {
        return Err(CoreError::InsufficientData {
            needed: 2,
            available: ds.len(),
        });
    }
    let mut total = 0.0;
    for (i, s) in ds.iter().enumerate() {
        total += nearest(s, ds, Some(i))?;
    }
    Ok(total / ds.len() as f64)
}

/// Mean Euclidean distance from each signal of `ds` to its nearest signal
/// in `train`.
pub fn nn_distance_train(ds: &[Signal], train: &[Signal]) -> Result<f64> {
    if ds.is_empty() || train.is_empty() {
        return Err(CoreError::InsufficientData {
            needed: 1,
            available: 0,
        });
    }
    let mut total = 0.0;
    for s in ds {
        total += nearest(s, train, None)?;
    }
    Ok(total / ds.len() as f64)
}

pub fn mse(clean: &Signal, test: &Signal) -> Result<f64> {
    clean.check_compatible(test)?;
    let n = clean.len().max(1) as f64;
    Ok(clean
        .samples()
        .iter()
        .zip(test.samples())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n)
}

/// Energy ratio of `clean` to the residual `test - clean`, in dB. A zero
/// residual gives `f64::INFINITY`.
pub fn snr_db(clean: &Signal, test: &Signal) -> Result<f64> {
    clean.check_compatible(test)?;
    let signal: f64 = clean.samples().iter().map(|v| v * v).sum();
    if signal <= 0.0 {
        return Err(CoreError::ZeroEnergy);
    }
    let residual: f64 = clean
        .samples()
        .iter()
        .zip(test.samples())
        .map(|(a, b)| (b - a).powi(2))
        .sum();
    if residual == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / residual).log10())
}

/// Absolute difference of the detected heart rates, in Hz. A signal with
/// fewer than two detected beats has rate 0.
pub fn delta_hr(clean: &Signal, denoised: &Signal) -> Result<f64> {
    if clean.sample_rate_hz() != denoised.sample_rate_hz() {
        return Err(CoreError::RateMismatch(
            clean.sample_rate_hz(),
            denoised.sample_rate_hz(),
        ));
    }
    Ok((detect_qrs(clean).heart_rate_hz - detect_qrs(denoised).heart_rate_hz).abs())
}

fn expect_kind(net: &Network, kind: NetworkKind) -> Result<()> {
    if net.kind() != kind {
        return Err(CoreError::WrongNetwork {
            expected: kind.name(),
            found: net.kind().name(),
        });
    }
    Ok(())
}

/// Passes signals through a denoiser network in inference mode.
pub fn run_denoiser(net: &mut Network, signals: &[Signal]) -> Result<Vec<Signal>> {
    expect_kind(net, NetworkKind::Denoiser)?;
    let len = net.spec().arch.signal_len;
    let _guard = no_grad();
    let mut out = Vec::with_capacity(signals.len());
    for chunk in signals.chunks(EVAL_BATCH) {
        let mut data = Vec::with_capacity(chunk.len() * len);
        for s in chunk {
            if s.len() != len {
                return Err(CoreError::LengthMismatch(len, s.len()));
            }
            data.extend_from_slice(s.samples());
        }
        let y = net.forward(&Tensor::new(&[chunk.len(), len, 1], data)?, Mode::Infer)?;
        for (s, row) in chunk.iter().zip(y.data().chunks(len)) {
            out.push(s.with_samples(row.to_vec()));
        }
    }
    Ok(out)
}

/// A denoising method under evaluation, listed in report order.
pub enum Method<'a> {
    None,
    Bandpass,
    Wavelet,
    Denoiser(&'a mut Network),
}

impl Method<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Bandpass => "bandpass",
            Method::Wavelet => "wavelet",
            Method::Denoiser(_) => "denoiser",
        }
    }

    pub fn apply(&mut self, noisy: &[Signal]) -> Result<Vec<Signal>> {
        match self {
            Method::None => Ok(noisy.to_vec()),
            Method::Bandpass => noisy.iter().map(bandpass_filter).collect(),
            Method::Wavelet => noisy.iter().map(wavelet_filter).collect(),
            Method::Denoiser(net) => run_denoiser(net, noisy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset_tag: String,
    pub mse: f64,
    pub snr_db: f64,
    pub delta_hr_hz: f64,
    pub inception_score: Option<(f64, f64)>,
    pub d_self: Option<f64>,
    pub d_train: Option<f64>,
}

impl MetricReport {
    pub fn new(dataset_tag: impl Into<String>, mse: f64, snr_db: f64, delta_hr_hz: f64) -> Self {
        MetricReport {
            dataset_tag: dataset_tag.into(),
            mse,
            snr_db,
            delta_hr_hz,
            inception_score: None,
            d_self: None,
            d_train: None,
        }
    }
}

/// Mean MSE, S/N and heart-rate error of `method` over `pairs`.
pub fn evaluate_denoiser(
    method: &mut Method<'_>,
    pairs: &[SignalPair],
    tag: &str,
) -> Result<MetricReport> {
    if pairs.is_empty() {
        return Err(CoreError::InsufficientData {
            needed: 1,
            available: 0,
        });
    }
    let noisy: Vec<Signal> = pairs.iter().map(|p| p.noisy.clone()).collect();
    let denoised = method.apply(&noisy)?;
    let (mut m, mut s, mut h) = (0.0, 0.0, 0.0);
    for (p, y) in pairs.iter().zip(&denoised) {
        m += mse(&p.clean, y)?;
        s += snr_db(&p.clean, y)?;
        h += delta_hr(&p.clean, y)?;
    }
    let n = pairs.len() as f64;
    Ok(MetricReport::new(tag, m / n, s / n, h / n))
}

pub const REPORT_HEADER: [&str; 8] = [
    "dataset_tag",
    "mse",
    "snr_db",
    "delta_hr_hz",
    "is_mean",
    "is_std",
    "d_self",
    "d_train",
];

#[derive(Serialize, Deserialize)]
struct ReportRow {
    dataset_tag: String,
    mse: f64,
    snr_db: f64,
    delta_hr_hz: f64,
    is_mean: Option<f64>,
    is_std: Option<f64>,
    d_self: Option<f64>,
    d_train: Option<f64>,
}

impl From<&MetricReport> for ReportRow {
    fn from(r: &MetricReport) -> Self {
        ReportRow {
            dataset_tag: r.dataset_tag.clone(),
            mse: r.mse,
            snr_db: r.snr_db,
            delta_hr_hz: r.delta_hr_hz,
            is_mean: r.inception_score.map(|s| s.0),
            is_std: r.inception_score.map(|s| s.1),
            d_self: r.d_self,
            d_train: r.d_train,
        }
    }
}

pub fn write_reports<W: Write>(reports: &[MetricReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if reports.is_empty() {
        out.write_record(REPORT_HEADER)?;
    }
    for r in reports {
        out.serialize(ReportRow::from(r))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_reports<R: Read>(r: R) -> Result<Vec<MetricReport>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != REPORT_HEADER {
        return Err(CoreError::InvalidParameter(format!(
            "unexpected report header {header:?}"
        )));
    }
    rdr.deserialize::<ReportRow>()
        .map(|row| {
            let row = row?;
            Ok(MetricReport {
                dataset_tag: row.dataset_tag,
                mse: row.mse,
                snr_db: row.snr_db,
                delta_hr_hz: row.delta_hr_hz,
                inception_score: row.is_mean.zip(row.is_std),
                d_self: row.d_self,
                d_train: row.d_train,
            })
        })
        .collect()
}
