use ecg_tensor::TensorError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("signal is empty")]
    EmptySignal,

    #[error("sample rate must be positive and finite, got {0}")]
    BadSampleRate(f64),

    #[error("length mismatch: {0} vs {1} samples")]
    LengthMismatch(usize, usize),

    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(f64, f64),

    #[error("bad magic bytes {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("{signals} signals but {labels} label rows")]
    LabelCount { signals: usize, labels: usize },

    #[error("label byte {0} is neither 0 nor 1")]
    InvalidLabel(u8),

    #[error("invalid split fractions {0:?}")]
    BadFractions(Vec<f64>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration produced a non-finite state at sample {0}")]
    NonFinite(usize),

    #[error("signal of {len} samples is shorter than the {window}-sample window")]
    TooShort { len: usize, window: usize },

    #[error("need at least {needed} items, got {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("reference signal has zero energy")]
    ZeroEnergy,

    #[error("probability row {0} sums to zero")]
    ZeroRow(usize),

    #[error("model dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("expected a {expected} network, got {found}")]
    WrongNetwork {
        expected: &'static str,
        found: &'static str,
    },

    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
