//! Three-variable dynamical ECG model.
//!
//! A point circles the unit limit cycle in the (x, y) plane at angular speed
//! `ω = 2π·HR/60`; each PQRST event is a Gaussian bump in angle that pushes
//! the z coordinate, which relaxes back towards zero:
//!
//! ```text
//! ẋ = αx − ωy          α = 1 − √(x² + y²)
//! ẏ = αy + ωx
//! ż = −Σᵢ aᵢ Δθᵢ exp(−Δθᵢ² / 2bᵢ²) − c·z     Δθᵢ = wrap(θ − θᵢ)
//! ```

use std::f64::consts::PI;

use crate::error::{CoreError, Result};
use crate::signal::{scale_to_unit, Signal};

#[derive(Debug, Clone, PartialEq)]
pub struct McSharryParams {
    pub heart_rate_bpm: f64,
    pub sample_rate_hz: f64,
    /// Event angles for P, Q, R, S, T in radians.
    pub pqrst_angles: [f64; 5],
    pub pqrst_amplitudes: [f64; 5],
    pub pqrst_widths: [f64; 5],
    pub baseline_coupling: f64,
    pub duration_s: f64,
    /// Angle where the trajectory starts; `-π` puts the first beat a third
    /// of a cycle after the start.
    pub initial_phase: f64,
}

impl Default for McSharryParams {
    fn default() -> Self {
        McSharryParams {
            heart_rate_bpm: 60.0,
            sample_rate_hz: 500.0,
            pqrst_angles: [-PI / 3.0, -PI / 12.0, 0.0, PI / 12.0, PI / 2.0],
            pqrst_amplitudes: [1.2, -5.0, 30.0, -7.5, 0.75],
            pqrst_widths: [0.25, 0.1, 0.1, 0.1, 0.4],
            baseline_coupling: 1.0,
            duration_s: 10.0,
            initial_phase: -PI,
        }
    }
}

impl McSharryParams {
    pub fn with_rate(heart_rate_bpm: f64) -> Self {
        McSharryParams {
            heart_rate_bpm,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("heart_rate_bpm", self.heart_rate_bpm),
            ("sample_rate_hz", self.sample_rate_hz),
            ("baseline_coupling", self.baseline_coupling),
            ("duration_s", self.duration_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(CoreError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self
            .pqrst_widths
            .iter()
            .any(|b| !(b.is_finite() && *b > 0.0))
        {
            return Err(CoreError::InvalidParameter(
                "PQRST widths must be positive".into(),
            ));
        }
        let angles = &self.pqrst_angles;
        let in_range = angles.iter().all(|t| *t > -PI && *t <= PI);
        if !in_range || angles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CoreError::InvalidParameter(
                "PQRST angles must increase strictly within (-π, π]".into(),
            ));
        }
        if self.pqrst_amplitudes.iter().any(|a| !a.is_finite()) || !self.initial_phase.is_finite() {
            return Err(CoreError::InvalidParameter(
                "non-finite amplitude or phase".into(),
            ));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }
}

fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

type State = [f64; 3];

fn derivative(p: &McSharryParams, omega: f64, s: &State) -> State {
    let [x, y, z] = *s;
    let alpha = 1.0 - (x * x + y * y).sqrt();
    let theta = y.atan2(x);
    let mut dz = -p.baseline_coupling * z;
    for i in 0..5 {
        let d = wrap_angle(theta - p.pqrst_angles[i]);
        let b = p.pqrst_widths[i];
        dz -= p.pqrst_amplitudes[i] * d * (-d * d / (2.0 * b * b)).exp();
    }
    [alpha * x - omega * y, alpha * y + omega * x, dz]
}

fn axpy(s: &State, h: f64, k: &State) -> State {
    [s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2]]
}

/// Integrates the model with fixed-step RK4 at the output rate and returns
/// the z trajectory scaled to `[-1, 1]`.
pub fn mcsharry_generate(p: &McSharryParams) -> Result<Signal> {
    p.validate()?;
    let n = p.sample_count();
    let omega = 2.0 * PI * p.heart_rate_bpm / 60.0;
    let h = 1.0 / p.sample_rate_hz;
    let mut s: State = [p.initial_phase.cos(), p.initial_phase.sin(), 0.0];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        out.push(s[2]);
        let k1 = derivative(p, omega, &s);
        let k2 = derivative(p, omega, &axpy(&s, h / 2.0, &k1));
        let k3 = derivative(p, omega, &axpy(&s, h / 2.0, &k2));
        let k4 = derivative(p, omega, &axpy(&s, h, &k3));
        for j in 0..3 {
            s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite(i));
        }
    }
    scale_to_unit(&Signal::new(out, p.sample_rate_hz)?)
}
