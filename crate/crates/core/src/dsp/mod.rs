//! Waveform to Log-Gammatone feature pipeline.
//!
//! `samples → Hamming STFT power → 128-band gammatone weighting → log10 →
//! regression delta → 128-frame segments (static, delta)`.

mod clip;
mod features;
mod gammatone;
mod matrix;
mod normalize;
mod resample;
mod stft;

pub use clip::WaveClip;
pub use features::{delta, log_gt, segment, FeatureExtractor, LogGTSegment};
pub use gammatone::{erb_rate, erb_rate_inverse, GammatoneFilterbank};
pub use matrix::Matrix;
pub use normalize::NormStats;
pub use resample::{resample_linear, resample_rate};
pub use stft::{hamming, stft_power, PowerSpectrogram, Stft};

pub const SAMPLE_RATE: u32 = 44_100;
/// 23 ms analysis window at 44.1 kHz.
pub const N_FFT: usize = 1024;
/// 50% overlap.
pub const HOP: usize = 512;
pub const N_BINS: usize = N_FFT / 2 + 1;
pub const N_BANDS: usize = 128;
pub const SEGMENT_FRAMES: usize = 128;
pub const SEGMENT_HOP: usize = 64;
pub const CHANNELS: usize = 2;
/// Elements in one `128×128×2` segment.
pub const SEGMENT_LEN: usize = N_BANDS * SEGMENT_FRAMES * CHANNELS;
/// Added to band energies before the logarithm.
pub const LOG_EPSILON: f64 = 1e-10;
pub const DELTA_HALF_WINDOW: usize = 2;

#[cfg(test)]
mod tests;
