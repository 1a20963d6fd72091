use std::f64::consts::PI;

use ecg_core::dsp::{
    bandpass_filter, detect_qrs, hz_to_mel, mel_band_edges, mel_energies, mel_spectrogram,
    wavelet_denoise, wavelet_filter, Threshold, MEL_BANDS,
};
use ecg_core::evaluation::mse;
use ecg_core::synthesis::{
    apply_noise, make_training_pairs, mcsharry_generate, sample_noise_params, McSharryParams,
    NoiseParams,
};
use ecg_core::Signal;
use proptest::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

fn sine(freq: f64, amp: f64, len: usize, rate: f64) -> Signal {
    Signal::new(
        (0..len)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / rate).sin())
            .collect(),
        rate,
    )
    .unwrap()
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// One-sided amplitude spectrum: `(frequency, amplitude)` per bin.
fn amplitude_spectrum(s: &Signal) -> Vec<(f64, f64)> {
    let n = s.len();
    let mut buf: Vec<Complex<f64>> = s.samples().iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    (0..=n / 2)
        .map(|k| {
            let scale = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
            (
                k as f64 * s.sample_rate_hz() / n as f64,
                scale * buf[k].norm() / n as f64,
            )
        })
        .collect()
}

/// Band energy share of a Hann-windowed periodogram. The window keeps the
/// leakage of sub-cycle components (wander below 0.5 Hz over 10 s) from
/// smearing across the whole band.
fn energy_fraction(s: &Signal, lo: f64, hi: f64) -> f64 {
    let n = s.len() as f64;
    let windowed = s.with_samples(
        s.samples()
            .iter()
            .enumerate()
            .map(|(i, v)| v * (0.5 - 0.5 * (2.0 * PI * i as f64 / n).cos()))
            .collect(),
    );
    let spec = amplitude_spectrum(&windowed);
    let total: f64 = spec.iter().map(|(_, a)| a * a).sum();
    let inside: f64 = spec
        .iter()
        .filter(|(f, _)| *f >= lo && *f <= hi)
        .map(|(_, a)| a * a)
        .sum();
    inside / total
}

#[test]
fn mcsharry_beats_match_commanded_rate() {
    for (bpm, beats, tol) in [(60.0, 10.0, 0.05), (90.0, 15.0, 0.07), (120.0, 20.0, 0.1)] {
        let s = mcsharry_generate(&McSharryParams::with_rate(bpm)).unwrap();
        let qrs = detect_qrs(&s);
        let hr = bpm / 60.0;
        assert!(
            (qrs.peak_indices.len() as f64 - beats).abs() <= 1.0,
            "{bpm} bpm: {} peaks",
            qrs.peak_indices.len()
        );
        assert!(
            (qrs.heart_rate_hz - hr).abs() < tol,
            "{bpm} bpm: {} Hz",
            qrs.heart_rate_hz
        );
        let rr = qrs.rr_intervals(500.0);
        let mean_rr = rr.iter().sum::<f64>() / rr.len() as f64;
        assert!((mean_rr - 60.0 / bpm).abs() < 0.05 * 60.0 / bpm);
    }
}

#[test]
fn mcsharry_autocorrelation_peaks_at_the_period() {
    for bpm in [60.0, 75.0, 100.0] {
        let s = mcsharry_generate(&McSharryParams::with_rate(bpm)).unwrap();
        let x = s.samples();
        let period = 60.0 / bpm * 500.0;
        let lo = (period * 0.5) as usize;
        let hi = (period * 1.5) as usize;
        let best = (lo..hi)
            .max_by(|&a, &b| {
                let ac = |lag: usize| x.iter().zip(&x[lag..]).map(|(p, q)| p * q).sum::<f64>();
                ac(a).total_cmp(&ac(b))
            })
            .unwrap();
        assert!(
            (best as f64 - period).abs() <= 2.0,
            "{bpm} bpm: lag {best} vs {period}"
        );
    }
}

#[test]
fn qrs_peaks_shift_with_delay() {
    let s = mcsharry_generate(&McSharryParams::with_rate(72.0)).unwrap();
    let base = detect_qrs(&s).peak_indices;
    for k in [7usize, 40, 113] {
        let mut delayed = vec![s.samples()[0]; k];
        delayed.extend_from_slice(s.samples());
        let moved = detect_qrs(&s.with_samples(delayed)).peak_indices;
        assert_eq!(moved.len(), base.len(), "delay {k}");
        for (a, b) in base.iter().zip(&moved) {
            assert!(
                (*b as i64 - *a as i64 - k as i64).abs() <= 2,
                "delay {k}: {a} -> {b}"
            );
        }
    }
}

#[test]
fn power_line_noise_peaks_at_50_hz() {
    let mut p = NoiseParams::silent(1.0);
    p.pl_amp = 0.1;
    let out = apply_noise(&Signal::zeros(5000, 500.0).unwrap(), &p).unwrap();
    let spec = amplitude_spectrum(&out);
    let (f, a) = spec
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert!((f - 50.0).abs() <= 0.5, "peak at {f} Hz");
    assert!((a - 0.1).abs() <= 0.005, "peak amplitude {a}");
}

#[test]
fn baseline_wander_stays_below_1_hz() {
    for seed in 0..20 {
        let mut p = sample_noise_params(seed, 1.0);
        p.pl_amp = 0.0;
        p.chirp_amp = 0.0;
        let out = apply_noise(&Signal::zeros(5000, 500.0).unwrap(), &p).unwrap();
        if p.bw_amp * p.bw_freq_hz > 0.0 {
            assert!(energy_fraction(&out, 0.0, 1.0) >= 0.99, "seed {seed}");
        }
    }
}

#[test]
fn motion_artifact_stays_in_chirp_band() {
    for seed in 0..20 {
        let mut p = sample_noise_params(seed, 1.0);
        p.pl_amp = 0.0;
        p.bw_amp = 0.0;
        p.chirp_amp = 0.1;
        let out = apply_noise(&Signal::zeros(5000, 500.0).unwrap(), &p).unwrap();
        let frac = energy_fraction(&out, 0.5, 120.0);
        assert!(frac >= 0.95, "seed {seed}: {frac}");
    }
}

#[test]
fn bandpass_passes_5_hz_and_rejects_50_hz() {
    let pass = sine(5.0, 1.0, 5000, 500.0);
    let stop = sine(50.0, 1.0, 5000, 500.0);
    let out_pass = bandpass_filter(&pass).unwrap();
    let out_stop = bandpass_filter(&stop).unwrap();
    assert!(rms(out_pass.samples()) >= 0.707 * rms(pass.samples()));
    assert!(rms(out_stop.samples()) <= 0.1 * rms(stop.samples()));
    let zero = Signal::zeros(100, 500.0).unwrap();
    assert_eq!(bandpass_filter(&zero).unwrap(), zero);
}

#[test]
fn wavelet_zero_threshold_reconstructs() {
    let s = mcsharry_generate(&McSharryParams::default()).unwrap();
    let noisy = apply_noise(&s, &sample_noise_params(1, 1.0)).unwrap();
    let y = wavelet_denoise(noisy.samples(), 6, Threshold::Fixed(0.0)).unwrap();
    for (a, b) in noisy.samples().iter().zip(&y) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn wavelet_denoising_usually_helps() {
    let mut wins = 0;
    for seed in 0..100u64 {
        let bpm = 50.0 + (seed % 50) as f64;
        let clean = mcsharry_generate(&McSharryParams::with_rate(bpm)).unwrap();
        let pair = &make_training_pairs(&[clean], 1.0, seed).unwrap()[0];
        let filtered = wavelet_filter(&pair.noisy).unwrap();
        if mse(&pair.clean, &filtered).unwrap() < mse(&pair.clean, &pair.noisy).unwrap() {
            wins += 1;
        }
    }
    assert!(wins >= 80, "wavelet won {wins}/100");
}

#[test]
fn mel_peak_band_for_50_hz_sine() {
    let s = sine(50.0, 1.0, 5000, 500.0);
    let energies = mel_energies(&s).unwrap();
    let mut totals = vec![0.0; MEL_BANDS];
    for (i, e) in energies.iter().enumerate() {
        totals[i % MEL_BANDS] += e;
    }
    let argmax = (0..MEL_BANDS)
        .max_by(|&a, &b| totals[a].total_cmp(&totals[b]))
        .unwrap();
    // Independent oracle: the band whose centre lies nearest to 50 Hz on the Mel axis.
    let step = hz_to_mel(250.0) / (MEL_BANDS + 1) as f64;
    let expected = ((hz_to_mel(50.0) / step).round() as usize) - 1;
    assert_eq!(argmax, expected);
    assert!((mel_band_edges(500.0)[expected + 1] - 50.0).abs() < 2.0);

    let m = mel_spectrogram(&s).unwrap();
    assert_eq!(m.bins.len(), 64 * 64);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mel_is_gain_invariant(seed in 0u64..1000, gain in 0.01f64..100.0) {
        let clean = mcsharry_generate(&McSharryParams::with_rate(60.0 + (seed % 40) as f64)).unwrap();
        let noisy = apply_noise(&clean, &sample_noise_params(seed, 1.0)).unwrap();
        let scaled = noisy.with_samples(noisy.samples().iter().map(|v| v * gain).collect());
        let a = mel_spectrogram(&noisy).unwrap();
        let b = mel_spectrogram(&scaled).unwrap();
        for (x, y) in a.bins.iter().zip(&b.bins) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn filters_are_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
        let s1 = apply_noise(&Signal::zeros(1200, 500.0).unwrap(), &sample_noise_params(seed, 1.0)).unwrap();
        let s2 = mcsharry_generate(&McSharryParams { duration_s: 2.4, ..McSharryParams::with_rate(80.0) }).unwrap();
        let mix = s1.with_samples(s1.samples().iter().zip(s2.samples()).map(|(x, y)| a * x + b * y).collect());
        let bp = |s: &Signal| bandpass_filter(s).unwrap().into_samples();
        let wv = |s: &Signal| wavelet_denoise(s.samples(), 6, Threshold::Fixed(0.0)).unwrap();
        for f in [&bp as &dyn Fn(&Signal) -> Vec<f64>, &wv] {
            let lhs = f(&mix);
            let (r1, r2) = (f(&s1), f(&s2));
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - (a * r1[i] + b * r2[i])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn noise_is_linear_in_gamma(seed in any::<u64>(), gamma in 0.0f64..5.0) {
        let clean = mcsharry_generate(&McSharryParams { duration_s: 2.0, ..McSharryParams::default() }).unwrap();
        let mut p = sample_noise_params(seed, gamma);
        let once = apply_noise(&clean, &p).unwrap();
        p.gamma = 2.0 * gamma;
        let twice = apply_noise(&clean, &p).unwrap();
        for ((c, x1), x2) in clean.samples().iter().zip(once.samples()).zip(twice.samples()) {
            prop_assert!(((x2 - c) - 2.0 * (x1 - c)).abs() < 1e-12);
        }
    }
}

#[test]
fn bw_freq_mean_over_many_draws() {
    let draws: Vec<f64> = (0..10_000)
        .map(|s| sample_noise_params(s, 1.0).bw_freq_hz)
        .collect();
    assert!(draws.iter().all(|f| (0.0..=0.5).contains(f)));
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    assert!((mean - 0.25).abs() < 0.01, "mean {mean}");
}
