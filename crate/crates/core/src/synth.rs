//! Synthetic clips for demos, smoke tests and trainability probes.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::{WaveClip, SAMPLE_RATE};

/// `amplitude·sin(2π·freq·t)` at 44.1 kHz.
pub fn sine(freq: f64, seconds: f64, amplitude: f32) -> Vec<f32> {
    let n = (seconds * f64::from(SAMPLE_RATE)).round() as usize;
    (0..n)
        .map(|i| amplitude * (TAU * freq * i as f64 / f64::from(SAMPLE_RATE)).sin() as f32)
        .collect()
}

/// Uniform white noise in `[-amplitude, amplitude]` at 44.1 kHz.
pub fn noise(seconds: f64, amplitude: f32, seed: u64) -> Vec<f32> {
    let n = (seconds * f64::from(SAMPLE_RATE)).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-amplitude..=amplitude)).collect()
}

/// A two-class set: even-numbered clips are tones (label 0) at slightly
/// different pitches, odd-numbered clips white noise (label 1). Clip `i`
/// goes to fold `i % folds + 1`.
pub fn tone_noise_clips(count: usize, seconds: f64, folds: u8, seed: u64) -> Vec<WaveClip> {
    (0..count)
        .map(|i| {
            let id = format!("synth-{i:03}");
            let fold = (i % usize::from(folds.max(1))) as u8 + 1;
            if i % 2 == 0 {
                let freq = 330.0 + 55.0 * (i / 2 % 8) as f64;
                WaveClip::new(id, sine(freq, seconds, 0.5), SAMPLE_RATE, 0, fold)
            } else {
                WaveClip::new(id, noise(seconds, 0.5, seed.wrapping_add(i as u64)), SAMPLE_RATE, 1, fold)
            }
        })
        .collect()
}
