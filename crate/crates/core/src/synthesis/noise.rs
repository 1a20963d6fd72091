//! Baseline wander, power-line interference and motion artifacts, added to
//! a clean signal with a common strength `γ`:
//!
//! ```text
//! noisy(t) = x(t) + γ·(a_w(t) + a_m(t) + a_p(t))
//! a_w(t) = A_w sin(2π f_w t + φ₀)
//! a_p(t) = A_p sin(2π·50 t + φ₁)
//! a_m(t) = A_m sin(2π f_m t + φ₂) · sin(2π(f₀t + (f₁ − f₀)t²/2T) + φ₃)
//! ```
//!
//! where the chirp sweeps `f₀ → f₁` over the signal duration `T`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::signal::{Signal, SignalPair};

/// Sampling ranges for the stochastic noise parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRanges {
    pub bw_freq_max_hz: f64,
    pub bw_amp_max: f64,
    pub pl_amp_max: f64,
    pub pl_freq_hz: f64,
    pub chirp_amp_max: f64,
    pub chirp_f0_hz: f64,
    pub chirp_f1_hz: f64,
    pub chirp_mod_min_hz: f64,
    pub chirp_mod_max_hz: f64,
}

impl Default for NoiseRanges {
    fn default() -> Self {
        NoiseRanges {
            bw_freq_max_hz: 0.5,
            bw_amp_max: 0.3,
            pl_amp_max: 0.1,
            pl_freq_hz: 50.0,
            chirp_amp_max: 0.1,
            chirp_f0_hz: 0.5,
            chirp_f1_hz: 120.0,
            chirp_mod_min_hz: 0.1,
            chirp_mod_max_hz: 2.0,
        }
    }
}

impl NoiseRanges {
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            self.bw_freq_max_hz,
            self.bw_amp_max,
            self.pl_amp_max,
            self.chirp_amp_max,
            self.chirp_f0_hz,
        ];
        let ok = non_negative.iter().all(|v| v.is_finite() && *v >= 0.0)
            && self.pl_freq_hz > 0.0
            && self.chirp_f0_hz < self.chirp_f1_hz
            && self.chirp_mod_min_hz > 0.0
            && self.chirp_mod_min_hz <= self.chirp_mod_max_hz;
        if !ok {
            return Err(CoreError::InvalidParameter(format!(
                "bad noise ranges {self:?}"
            )));
        }
        Ok(())
    }
}

/// One realization of the noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseParams {
    pub gamma: f64,
    pub bw_freq_hz: f64,
    pub bw_amp: f64,
    pub pl_amp: f64,
    pub pl_freq_hz: f64,
    pub chirp_f0_hz: f64,
    pub chirp_f1_hz: f64,
    pub chirp_mod_freq_hz: f64,
    pub chirp_amp: f64,
    /// Phases of baseline wander, power line, chirp envelope and chirp.
    pub phases: [f64; 4],
}

impl NoiseParams {
    /// All amplitudes zero; useful as a starting point for single-component
    /// realizations.
    pub fn silent(gamma: f64) -> Self {
        let r = NoiseRanges::default();
        NoiseParams {
            gamma,
            bw_freq_hz: 0.0,
            bw_amp: 0.0,
            pl_amp: 0.0,
            pl_freq_hz: r.pl_freq_hz,
            chirp_f0_hz: r.chirp_f0_hz,
            chirp_f1_hz: r.chirp_f1_hz,
            chirp_mod_freq_hz: r.chirp_mod_min_hz,
            chirp_amp: 0.0,
            phases: [0.0; 4],
        }
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R, gamma: f64, ranges: &NoiseRanges) -> Self {
        let mut uniform = |hi: f64| {
            if hi > 0.0 {
                rng.random_range(0.0..hi)
            } else {
                0.0
            }
        };
        let bw_freq_hz = uniform(ranges.bw_freq_max_hz);
        let bw_amp = uniform(ranges.bw_amp_max);
        let pl_amp = uniform(ranges.pl_amp_max);
        let chirp_amp = uniform(ranges.chirp_amp_max);
        let phases = [0; 4].map(|_| uniform(2.0 * PI));
        let chirp_mod_freq_hz = if ranges.chirp_mod_max_hz > ranges.chirp_mod_min_hz {
            rng.random_range(ranges.chirp_mod_min_hz..ranges.chirp_mod_max_hz)
        } else {
            ranges.chirp_mod_min_hz
        };
        NoiseParams {
            gamma,
            bw_freq_hz,
            bw_amp,
            pl_amp,
            pl_freq_hz: ranges.pl_freq_hz,
            chirp_f0_hz: ranges.chirp_f0_hz,
            chirp_f1_hz: ranges.chirp_f1_hz,
            chirp_mod_freq_hz,
            chirp_amp,
            phases,
        }
    }

    /// `γ·(a_w + a_m + a_p)` at `len` samples of rate `rate`.
    pub fn realize(&self, len: usize, rate: f64) -> Vec<f64> {
        let duration = len as f64 / rate;
        let sweep = self.chirp_f1_hz - self.chirp_f0_hz;
        (0..len)
            .map(|i| {
                let t = i as f64 / rate;
                let wander = self.bw_amp * (2.0 * PI * self.bw_freq_hz * t + self.phases[0]).sin();
                let line = self.pl_amp * (2.0 * PI * self.pl_freq_hz * t + self.phases[1]).sin();
                let envelope = (2.0 * PI * self.chirp_mod_freq_hz * t + self.phases[2]).sin();
                let chirp_phase =
                    2.0 * PI * (self.chirp_f0_hz * t + sweep * t * t / (2.0 * duration));
                let motion = self.chirp_amp * envelope * (chirp_phase + self.phases[3]).sin();
                self.gamma * (wander + motion + line)
            })
            .collect()
    }
}

/// Draws a realization from the default ranges.
pub fn sample_noise_params(seed: u64, gamma: f64) -> NoiseParams {
    NoiseParams::sample(
        &mut ChaCha8Rng::seed_from_u64(seed),
        gamma,
        &NoiseRanges::default(),
    )
}

pub fn apply_noise(x: &Signal, p: &NoiseParams) -> Result<Signal> {
    if x.is_empty() {
        return Err(CoreError::EmptySignal);
    }
    if p.gamma == 0.0 {
        return Ok(x.clone());
    }
    let noise = p.realize(x.len(), x.sample_rate_hz());
    Ok(x.with_samples(x.samples().iter().zip(noise).map(|(a, b)| a + b).collect()))
}

pub fn make_training_pairs(clean: &[Signal], gamma: f64, seed: u64) -> Result<Vec<SignalPair>> {
    make_training_pairs_with(clean, gamma, seed, &NoiseRanges::default())
}

/// One fresh realization per signal, drawn in order from a single seeded
/// stream.
pub fn make_training_pairs_with(
    clean: &[Signal],
    gamma: f64,
    seed: u64,
    ranges: &NoiseRanges,
) -> Result<Vec<SignalPair>> {
    if clean.is_empty() {
        return Err(CoreError::InsufficientData {
            needed: 1,
            available: 0,
        });
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "gamma must be non-negative, got {gamma}"
        )));
    }
    ranges.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    clean
        .iter()
        .map(|s| {
            let p = NoiseParams::sample(&mut rng, gamma, ranges);
            SignalPair::new(s.clone(), apply_noise(s, &p)?)
        })
        .collect()
}
