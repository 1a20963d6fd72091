mod mcsharry;
mod noise;

pub use mcsharry::{mcsharry_generate, McSharryParams};
pub use noise::{
    apply_noise, make_training_pairs, make_training_pairs_with, sample_noise_params, NoiseParams,
    NoiseRanges,
};
