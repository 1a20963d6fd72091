//! ECG synthesis, corruption, denoising and evaluation.
//!
//! The crate covers the whole pipeline: a dynamical clean-ECG model and a
//! parametric noise model ([`synthesis`]), classical filters, Mel
//! spectrograms and QRS detection ([`dsp`]), the generator, critic,
//! classifier and denoiser networks ([`models`]), their training loops
//! ([`training`]) and the metric suite ([`evaluation`]).

pub mod dsp;
mod error;
pub mod evaluation;
pub mod io;
pub mod models;
mod signal;
pub mod synthesis;
pub mod training;

pub use error::{CoreError, Result};
pub use signal::{
    scale_to_unit, split_dataset, Label, LabeledDataset, Signal, SignalPair, LABEL_COUNT,
};
