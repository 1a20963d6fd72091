//! Undecimated (stationary) wavelet transform with the Daubechies-6 filter
//! pair, periodic boundaries, and soft-threshold shrinkage.

use crate::error::{CoreError, Result};
use crate::signal::Signal;

/// Daubechies-6 reconstruction low-pass filter (12 taps, sums to √2).
pub const DB6_LOWPASS: [f64; 12] = [
    0.111_540_743_350_109_46,
    0.494_623_890_398_453_1,
    0.751_133_908_021_095_4,
    0.315_250_351_709_197_6,
    -0.226_264_693_965_439_82,
    -0.129_766_867_567_262_36,
    0.097_501_605_587_323_05,
    0.027_522_865_530_305_728,
    -0.031_582_039_317_486_03,
    0.000_553_842_201_161_496_1,
    0.004_777_257_510_945_511,
    -0.001_077_301_085_308_479_6,
];

pub const DEFAULT_LEVELS: usize = 6;

/// Quadrature-mirror high-pass: `g[k] = (-1)^k h[L-1-k]`.
pub fn db6_highpass() -> [f64; 12] {
    let mut g = [0.0; 12];
    for (k, v) in g.iter_mut().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        *v = sign * DB6_LOWPASS[11 - k];
    }
    g
}

/// Approximation at the coarsest level plus details from finest to coarsest.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
}

fn correlate(x: &[f64], taps: &[f64], step: usize) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            taps.iter()
                .enumerate()
                .map(|(k, h)| h * x[(i + k * step) % n])
                .sum()
        })
        .collect()
}

fn convolve_into(out: &mut [f64], x: &[f64], taps: &[f64], step: usize) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, h) in taps.iter().enumerate() {
            let j = (i + n - (k * step) % n) % n;
            acc += h * x[j];
        }
        *o += 0.5 * acc;
    }
}

pub fn swt(x: &[f64], levels: usize) -> Decomposition {
    let (h, g) = (DB6_LOWPASS, db6_highpass());
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    if x.is_empty() {
        return Decomposition {
            approx,
            details: vec![Vec::new(); levels],
        };
    }
    for level in 0..levels {
        let step = 1 << level;
        details.push(correlate(&approx, &g, step));
        approx = correlate(&approx, &h, step);
    }
    Decomposition { approx, details }
}

/// Exact inverse of [`swt`].
pub fn iswt(d: &Decomposition) -> Vec<f64> {
    let (h, g) = (DB6_LOWPASS, db6_highpass());
    let mut approx = d.approx.clone();
    for (level, detail) in d.details.iter().enumerate().rev() {
        let step = 1 << level;
        let mut next = vec![0.0; approx.len()];
        convolve_into(&mut next, &approx, &h, step);
        convolve_into(&mut next, detail, &g, step);
        approx = next;
    }
    approx
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// How detail coefficients are shrunk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// `σ√(2 ln N)` with `σ = MAD(finest detail) / 0.6745`.
    Universal,
    Fixed(f64),
}

impl Threshold {
    pub fn value(&self, finest: &[f64]) -> f64 {
        match *self {
            Threshold::Fixed(t) => t,
            Threshold::Universal => {
                let n = finest.len().max(2) as f64;
                let sigma = median(finest.iter().map(|v| v.abs()).collect()) / 0.6745;
                sigma * (2.0 * n.ln()).sqrt()
            }
        }
    }
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Shrinks every detail level with the same threshold and reconstructs.
pub fn wavelet_denoise(x: &[f64], levels: usize, threshold: Threshold) -> Result<Vec<f64>> {
    if levels == 0 {
        return Err(CoreError::InvalidParameter(
            "wavelet levels must be at least 1".into(),
        ));
    }
    let mut d = swt(x, levels);
    let t = threshold.value(&d.details[0]);
    if !(t.is_finite() && t >= 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "threshold {t} must be non-negative"
        )));
    }
    if t > 0.0 {
        for detail in &mut d.details {
            for v in detail.iter_mut() {
                *v = soft_threshold(*v, t);
            }
        }
    }
    Ok(iswt(&d))
}

/// The classical wavelet baseline: six levels, universal threshold.
pub fn wavelet_filter(s: &Signal) -> Result<Signal> {
    Ok(s.with_samples(wavelet_denoise(
        s.samples(),
        DEFAULT_LEVELS,
        Threshold::Universal,
    )?))
}
