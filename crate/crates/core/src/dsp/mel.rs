//! 64×64 log-Mel spectrograms for the label classifier.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{CoreError, Result};
use crate::signal::Signal;

pub const WINDOW: usize = 1024;
pub const FRAMES: usize = 64;
pub const MEL_BANDS: usize = 64;
/// Energies below this fraction of the maximum are floored before the log.
const POWER_FLOOR: f64 = 1e-10;
const CLIP_STD: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// Row-major `[frame][band]`.
    pub bins: Vec<f64>,
    pub source_length: usize,
}

impl Spectrogram {
    pub fn get(&self, frame: usize, band: usize) -> f64 {
        self.bins[frame * MEL_BANDS + band]
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Band edges in Hz: `MEL_BANDS + 2` points equally spaced in Mel from 0 to
/// Nyquist. Band `i` rises from edge `i`, peaks at `i + 1`, falls to `i + 2`.
pub fn mel_band_edges(rate_hz: f64) -> Vec<f64> {
    let top = hz_to_mel(rate_hz / 2.0);
    (0..MEL_BANDS + 2)
        .map(|i| mel_to_hz(top * i as f64 / (MEL_BANDS + 1) as f64))
        .collect()
}

/// Triangular weights `[band][fft bin]`.
fn filterbank(rate_hz: f64) -> Vec<Vec<f64>> {
    let edges = mel_band_edges(rate_hz);
    let bins = WINDOW / 2 + 1;
    (0..MEL_BANDS)
        .map(|b| {
            let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * rate_hz / WINDOW as f64;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Hop between the 64 frames: the first starts at 0, the last at
/// `len - WINDOW`.
pub fn hop_length(len: usize) -> usize {
    (len - WINDOW) / (FRAMES - 1)
}

fn frame_start(frame: usize, len: usize) -> usize {
    if frame == FRAMES - 1 {
        len - WINDOW
    } else {
        frame * hop_length(len)
    }
}

/// Mel band energies before the log and normalization, `[frame][band]`.
pub fn mel_energies(s: &Signal) -> Result<Vec<f64>> {
    let len = s.len();
    if len < WINDOW {
        return Err(CoreError::TooShort {
            len,
            window: WINDOW,
        });
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(WINDOW);
    let hann: Vec<f64> = (0..WINDOW)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / WINDOW as f64).cos())
        .collect();
    let bank = filterbank(s.sample_rate_hz());
    let mut out = Vec::with_capacity(FRAMES * MEL_BANDS);
    let mut buf = vec![Complex::new(0.0, 0.0); WINDOW];
    for frame in 0..FRAMES {
        let start = frame_start(frame, len);
        for (i, c) in buf.iter_mut().enumerate() {
            *c = Complex::new(s.samples()[start + i] * hann[i], 0.0);
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..WINDOW / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
        for weights in &bank {
            out.push(weights.iter().zip(&power).map(|(w, p)| w * p).sum());
        }
    }
    Ok(out)
}

/// Log-Mel spectrogram standardized over all cells, clipped at three
/// standard deviations and divided by three so every cell is in `[-1, 1]`.
pub fn mel_spectrogram(s: &Signal) -> Result<Spectrogram> {
    let energies = mel_energies(s)?;
    let zeros = || Spectrogram {
        bins: vec![0.0; FRAMES * MEL_BANDS],
        source_length: s.len(),
    };
    let peak = energies.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(zeros());
    }
    let db: Vec<f64> = energies
        .iter()
        .map(|e| 10.0 * (e / peak).max(POWER_FLOOR).log10())
        .collect();
    let n = db.len() as f64;
    let mean = db.iter().sum::<f64>() / n;
    let var = db.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var <= 0.0 {
        return Ok(zeros());
    }
    let std = var.sqrt();
    Ok(Spectrogram {
        bins: db
            .iter()
            .map(|v| ((v - mean) / std).clamp(-CLIP_STD, CLIP_STD) / CLIP_STD)
            .collect(),
        source_length: s.len(),
    })
}
