//! Training-set augmentation: waveform time stretch and pitch shift, and
//! feature-level mixup.

mod mixup;
mod vocoder;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use mixup::{draw_pairs, mixup, mixup_segments, sample_lambda, MixupPair};
pub use vocoder::{pitch_shift, time_stretch, STRETCH_HOP, STRETCH_N_FFT};

use crate::dsp::WaveClip;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentConfig {
    /// Time-stretch rates are drawn uniformly from this interval; rates above
    /// 1 shorten the clip.
    pub stretch_range: (f64, f64),
    pub shift_range_semitones: (f64, f64),
    /// Augmented waveform copies per training clip. Even-numbered copies are
    /// stretched, odd-numbered copies pitch shifted.
    pub copies_per_clip: usize,
    pub mixup_alpha: f64,
    pub mixup_enabled: bool,
    pub rng_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            stretch_range: (0.8, 1.3),
            shift_range_semitones: (-3.5, 3.5),
            copies_per_clip: 2,
            mixup_alpha: 0.2,
            mixup_enabled: true,
            rng_seed: 0,
        }
    }
}

impl AugmentConfig {
    /// No waveform copies and no mixup.
    pub fn disabled() -> Self {
        AugmentConfig {
            copies_per_clip: 0,
            mixup_enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.stretch_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!("stretch range ({lo}, {hi}) must be positive and ordered")));
        }
        let (lo, hi) = self.shift_range_semitones;
        if !(lo <= hi && lo >= -vocoder::MAX_SHIFT && hi <= vocoder::MAX_SHIFT) {
            return Err(Error::Config(format!(
                "shift range ({lo}, {hi}) must be ordered and within ±{}",
                vocoder::MAX_SHIFT
            )));
        }
        if !(self.mixup_alpha > 0.0 && self.mixup_alpha.is_finite()) {
            return Err(Error::Config(format!("mixup alpha {} must be positive", self.mixup_alpha)));
        }
        if self.copies_per_clip > usize::from(u8::MAX) {
            return Err(Error::Config(format!("at most 255 copies per clip, got {}", self.copies_per_clip)));
        }
        Ok(())
    }

    /// RNG stream for one clip, independent of processing order.
    pub fn clip_rng(&self, clip_id: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.rng_seed ^ fnv1a(clip_id.as_bytes()))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3))
}

/// The augmented copies of one clip, in copy order.
pub fn augment_clip(clip: &WaveClip, config: &AugmentConfig) -> Result<Vec<WaveClip>> {
    let mut rng = config.clip_rng(&clip.clip_id);
    (0..config.copies_per_clip)
        .map(|k| {
            if k % 2 == 0 {
                let (lo, hi) = config.stretch_range;
                let rate = if lo < hi { rng.random_range(lo..=hi) } else { lo };
                time_stretch(clip, rate)
            } else {
                let (lo, hi) = config.shift_range_semitones;
                let steps = if lo < hi { rng.random_range(lo..=hi) } else { lo };
                pitch_shift(clip, steps)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests;
