//! Environmental sound classification with an attention-based convolutional
//! recurrent network.
//!
//! The crate covers the whole pipeline: WAV ingestion, Log-Gammatone feature
//! extraction, waveform and mixup augmentation, the network itself on top of
//! a small reverse-mode autodiff engine, SGD training, and k-fold
//! cross-validation with clip-level evaluation.

pub mod augment;
pub mod autodiff;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
