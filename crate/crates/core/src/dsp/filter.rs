//! Butterworth biquad cascades and zero-phase (forward-backward) filtering.

use std::f64::consts::PI;

use crate::error::{CoreError, Result};
use crate::signal::Signal;

/// Passband of the classical bandpass baseline.
pub const BANDPASS_LOW_HZ: f64 = 0.05;
pub const BANDPASS_HIGH_HZ: f64 = 30.0;
pub const BANDPASS_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    /// Feedback coefficients `a1, a2` (`a0` normalized to 1).
    pub a: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Response {
    LowPass,
    HighPass,
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Transposed direct-form II state that a constant input `level` would
    /// have settled into.
    fn steady_state(&self, level: f64) -> [f64; 2] {
        let g = self.dc_gain();
        [(g - self.b[0]) * level, (self.b[2] - self.a[1] * g) * level]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z[0];
            z[0] = b1 * input - a1 * y + z[1];
            z[1] = b2 * input - a2 * y;
            *v = y;
        }
    }
}

/// Digital Butterworth sections via the bilinear transform with
/// pre-warping. `order` must be even.
pub fn butterworth(
    order: usize,
    response: Response,
    cutoff_hz: f64,
    rate_hz: f64,
) -> Result<Vec<Biquad>> {
    if order == 0 || !order.is_multiple_of(2) {
        return Err(CoreError::InvalidParameter(format!(
            "filter order {order} must be even"
        )));
    }
    if !(cutoff_hz > 0.0 && cutoff_hz < rate_hz / 2.0) {
        return Err(CoreError::InvalidParameter(format!(
            "cutoff {cutoff_hz} Hz outside (0, {}) Hz",
            rate_hz / 2.0
        )));
    }
    let w0 = 2.0 * PI * cutoff_hz / rate_hz;
    let (sin, cos) = w0.sin_cos();
    Ok((1..=order / 2)
        .map(|k| {
            let q = 1.0 / (2.0 * ((2 * k - 1) as f64 * PI / (2 * order) as f64).sin());
            let alpha = sin / (2.0 * q);
            let a0 = 1.0 + alpha;
            let b = match response {
                Response::LowPass => [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0],
                Response::HighPass => [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0],
            };
            Biquad {
                b: b.map(|c| c / a0),
                a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
            }
        })
        .collect())
}

fn run_cascade(sections: &[Biquad], x: &mut [f64], mut level: f64) {
    for s in sections {
        s.run(x, s.steady_state(level));
        level *= s.dc_gain();
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Zero-phase filtering: odd extension at both ends, then a forward and a
/// backward pass.
///
/// Each pass starts in the steady state of the mean of the first `settle`
/// samples of the signal it is about to reach. The edge sample itself is a
/// poor level estimate for oscillating input, and a filter with a very low
/// cutoff would ring from it across the whole record.
pub fn filtfilt(sections: &[Biquad], x: &[f64], settle: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let settle = settle.clamp(1, n);
    let pad = (3 * (2 * sections.len() + 1)).min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
    run_cascade(sections, &mut ext, mean(&x[..settle]));
    let tail = mean(&ext[pad + n - settle..pad + n]);
    ext.reverse();
    run_cascade(sections, &mut ext, tail);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

fn bandpass_sections(rate: f64, low: f64, high: f64, order: usize) -> Result<Vec<Biquad>> {
    let mut sections = butterworth(order, Response::HighPass, low, rate)?;
    sections.extend(butterworth(order, Response::LowPass, high, rate)?);
    Ok(sections)
}

/// Zero-phase band-pass over `[low_hz, high_hz]` built from two
/// Butterworth filters of the given order.
pub fn bandpass(s: &Signal, low_hz: f64, high_hz: f64, order: usize) -> Result<Signal> {
    let sections = bandpass_sections(s.sample_rate_hz(), low_hz, high_hz, order)?;
    let settle = s.sample_rate_hz().round() as usize;
    Ok(s.with_samples(filtfilt(&sections, s.samples(), settle)))
}

/// The 0.05–30 Hz classical baseline.
pub fn bandpass_filter(s: &Signal) -> Result<Signal> {
    bandpass(s, BANDPASS_LOW_HZ, BANDPASS_HIGH_HZ, BANDPASS_ORDER)
}
