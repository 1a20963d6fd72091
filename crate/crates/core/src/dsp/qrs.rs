//! Pan–Tompkins QRS detection.

use crate::dsp::filter::{butterworth, filtfilt, Response};
use crate::signal::{scale_to_unit, Signal};

const BAND_LOW_HZ: f64 = 5.0;
const BAND_HIGH_HZ: f64 = 15.0;
const INTEGRATION_S: f64 = 0.150;
const REFRACTORY_S: f64 = 0.200;
const T_WAVE_S: f64 = 0.360;
const LEARNING_S: f64 = 2.0;
const SEARCH_BACK_FACTOR: f64 = 1.66;
/// Half-width of the window in which the R sample is located around an
/// integrator peak.
const LOCATE_S: f64 = 0.100;

#[derive(Debug, Clone, PartialEq)]
pub struct QrsAnnotation {
    pub peak_indices: Vec<usize>,
    pub heart_rate_hz: f64,
}

impl QrsAnnotation {
    fn from_peaks(peaks: Vec<usize>, rate: f64) -> Self {
        let heart_rate_hz = if peaks.len() >= 2 {
            let span = (peaks[peaks.len() - 1] - peaks[0]) as f64 / rate;
            (peaks.len() - 1) as f64 / span
        } else {
            0.0
        };
        QrsAnnotation {
            peak_indices: peaks,
            heart_rate_hz,
        }
    }

    /// RR intervals in seconds.
    pub fn rr_intervals(&self, rate: f64) -> Vec<f64> {
        self.peak_indices
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64 / rate)
            .collect()
    }
}

/// Intermediate signals of the detector, exposed for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct PanTompkinsStages {
    pub bandpassed: Vec<f64>,
    pub integrated: Vec<f64>,
}

fn secs(s: f64, rate: f64) -> usize {
    (s * rate).round() as usize
}

pub fn pan_tompkins_stages(s: &Signal) -> PanTompkinsStages {
    let rate = s.sample_rate_hz();
    let n = s.len();
    let x = match scale_to_unit(s) {
        Ok(scaled) => scaled.into_samples(),
        Err(_) => Vec::new(),
    };
    let high = BAND_HIGH_HZ.min(0.45 * rate);
    let bandpassed = match (
        butterworth(2, Response::HighPass, BAND_LOW_HZ.min(high / 2.0), rate),
        butterworth(2, Response::LowPass, high, rate),
    ) {
        (Ok(mut hp), Ok(lp)) => {
            hp.extend(lp);
            filtfilt(&hp, &x, (0.2 * rate).round() as usize)
        }
        _ => x,
    };
    let at = |i: isize| bandpassed[i.clamp(0, n as isize - 1) as usize];
    let squared: Vec<f64> = (0..n as isize)
        .map(|i| {
            let d = (2.0 * at(i + 1) + at(i + 2) - at(i - 2) - 2.0 * at(i - 1)) * rate / 8.0;
            d * d
        })
        .collect();
    let window = secs(INTEGRATION_S, rate).max(1);
    let half = window / 2;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + squared[i];
    }
    let integrated = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + window - half).min(n);
            (prefix[hi] - prefix[lo]) / window as f64
        })
        .collect();
    PanTompkinsStages {
        bandpassed,
        integrated,
    }
}

/// Local maxima of `v`, thinned so no two are closer than `gap` samples.
fn candidate_peaks(v: &[f64], gap: usize) -> Vec<usize> {
    let mut peaks: Vec<usize> = Vec::new();
    for i in 1..v.len().saturating_sub(1) {
        if v[i] > 0.0 && v[i] > v[i - 1] && v[i] >= v[i + 1] {
            match peaks.last() {
                Some(&last) if i - last < gap => {
                    if v[i] > v[last] {
                        *peaks.last_mut().expect("non-empty") = i;
                    }
                }
                _ => peaks.push(i),
            }
        }
    }
    peaks
}

fn max_slope(bp: &[f64], centre: usize, half: usize) -> f64 {
    let lo = centre.saturating_sub(half).max(1);
    let hi = (centre + half).min(bp.len());
    (lo..hi)
        .map(|i| (bp[i] - bp[i - 1]).abs())
        .fold(0.0, f64::max)
}

struct Thresholds {
    signal: f64,
    noise: f64,
}

impl Thresholds {
    fn primary(&self) -> f64 {
        self.noise + 0.25 * (self.signal - self.noise)
    }
}

pub fn detect_qrs(s: &Signal) -> QrsAnnotation {
    let rate = s.sample_rate_hz();
    if s.len() < 5 {
        return QrsAnnotation::from_peaks(Vec::new(), rate);
    }
    let stages = pan_tompkins_stages(s);
    let (bp, mwi) = (&stages.bandpassed, &stages.integrated);
    let refractory = secs(REFRACTORY_S, rate).max(1);
    let candidates = candidate_peaks(mwi, refractory);
    if candidates.is_empty() {
        return QrsAnnotation::from_peaks(Vec::new(), rate);
    }

    let learn = secs(LEARNING_S, rate).clamp(1, mwi.len());
    let head = &mwi[..learn];
    let mut th = Thresholds {
        signal: 0.25 * head.iter().copied().fold(0.0, f64::max),
        noise: 0.5 * head.iter().sum::<f64>() / learn as f64,
    };
    let slope_half = secs(0.075, rate).max(1);
    let t_wave = secs(T_WAVE_S, rate);

    let mut qrs: Vec<usize> = Vec::new();
    let mut last_slope = 0.0;
    let mut rr_recent: Vec<usize> = Vec::new();
    let mut noise_since_last: Vec<usize> = Vec::new();

    for &p in &candidates {
        // Search back for a missed beat when the gap exceeds 1.66 mean RR.
        if let (Some(&last), false) = (qrs.last(), rr_recent.is_empty()) {
            let mean_rr = rr_recent.iter().sum::<usize>() as f64 / rr_recent.len() as f64;
            if (p - last) as f64 > SEARCH_BACK_FACTOR * mean_rr {
                let secondary = 0.5 * th.primary();
                let best = noise_since_last
                    .iter()
                    .copied()
                    .filter(|&c| c - last >= refractory && mwi[c] > secondary)
                    .max_by(|&a, &b| mwi[a].total_cmp(&mwi[b]));
                if let Some(c) = best {
                    th.signal = 0.25 * mwi[c] + 0.75 * th.signal;
                    rr_recent.push(c - last);
                    last_slope = max_slope(bp, c, slope_half);
                    qrs.push(c);
                }
            }
        }

        let value = mwi[p];
        let mut is_qrs = value > th.primary();
        if is_qrs {
            if let Some(&last) = qrs.last() {
                if p - last < t_wave && max_slope(bp, p, slope_half) < 0.5 * last_slope {
                    is_qrs = false;
                }
            }
        }
        if is_qrs {
            th.signal = 0.125 * value + 0.875 * th.signal;
            if let Some(&last) = qrs.last() {
                rr_recent.push(p - last);
                if rr_recent.len() > 8 {
                    rr_recent.remove(0);
                }
            }
            last_slope = max_slope(bp, p, slope_half);
            qrs.push(p);
            noise_since_last.clear();
        } else {
            th.noise = 0.125 * value + 0.875 * th.noise;
            noise_since_last.push(p);
        }
    }

    // Locate each R sample on the band-passed signal.
    let half = secs(LOCATE_S, rate).max(1);
    let mut peaks: Vec<usize> = Vec::with_capacity(qrs.len());
    for &p in &qrs {
        let lo = p.saturating_sub(half);
        let hi = (p + half + 1).min(bp.len());
        let r = (lo..hi)
            .max_by(|&a, &b| bp[a].abs().total_cmp(&bp[b].abs()))
            .unwrap_or(p);
        if peaks.last().is_none_or(|&last| r > last) {
            peaks.push(r);
        }
    }
    QrsAnnotation::from_peaks(peaks, rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_signal_has_no_beats() {
        let a = detect_qrs(&Signal::zeros(5000, 500.0).unwrap());
        assert!(a.peak_indices.is_empty());
        assert_eq!(a.heart_rate_hz, 0.0);
    }

    #[test]
    fn spike_train_rate() {
        let mut x = vec![0.0; 5000];
        for k in 0..10 {
            let c = 250 + 500 * k;
            for d in 0..10 {
                x[c - 5 + d] = 1.0 - (d as f64 - 5.0).abs() / 5.0;
            }
        }
        let a = detect_qrs(&Signal::new(x, 500.0).unwrap());
        assert_eq!(a.peak_indices.len(), 10, "{:?}", a.peak_indices);
        assert!((a.heart_rate_hz - 1.0).abs() < 1e-3);
    }

    #[test]
    fn thinning_keeps_the_larger_peak() {
        let v = [0.0, 1.0, 0.0, 3.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0];
        assert_eq!(candidate_peaks(&v, 3), vec![3, 8]);
    }
}
