mod filter;
mod mel;
mod qrs;
mod wavelet;

pub use filter::{
    bandpass, bandpass_filter, butterworth, filtfilt, Biquad, Response, BANDPASS_HIGH_HZ,
    BANDPASS_LOW_HZ, BANDPASS_ORDER,
};
pub use mel::{
    hop_length, hz_to_mel, mel_band_edges, mel_energies, mel_spectrogram, mel_to_hz, Spectrogram,
    FRAMES, MEL_BANDS, WINDOW,
};
pub use qrs::{detect_qrs, pan_tompkins_stages, PanTompkinsStages, QrsAnnotation};
pub use wavelet::{
    db6_highpass, iswt, soft_threshold, swt, wavelet_denoise, wavelet_filter, Decomposition,
    Threshold, DB6_LOWPASS, DEFAULT_LEVELS,
};
