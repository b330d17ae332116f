use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{Matrix, WaveClip, HOP, N_BINS, N_FFT};
use crate::error::{Error, Result};

/// Periodic Hamming window, `0.54 − 0.46·cos(2πn/N)`.
pub fn hamming(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Squared-magnitude STFT, `N_BINS` rows (bins 0..=512) by `n_frames` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerSpectrogram {
    pub values: Matrix,
}

impl PowerSpectrogram {
    pub fn n_bins(&self) -> usize {
        self.values.rows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.cols()
    }

    /// Bin index of the largest value in frame `f` (lowest bin on ties).
    pub fn argmax_bin(&self, f: usize) -> usize {
        let mut best = 0;
        for b in 1..self.n_bins() {
            if self.values.get(b, f) > self.values.get(best, f) {
                best = b;
            }
        }
        best
    }
}

/// Frame count for a signal of `n` samples: `floor((n − 1024)/512) + 1`.
pub fn frame_count(n: usize) -> Option<usize> {
    (n >= N_FFT).then(|| (n - N_FFT) / HOP + 1)
}

/// Reusable 1024-point Hamming STFT.
#[derive(Clone)]
pub struct Stft {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("n_fft", &N_FFT).field("hop", &HOP).finish()
    }
}

impl Default for Stft {
    fn default() -> Self {
        Self::new()
    }
}

impl Stft {
    pub fn new() -> Self {
        Stft {
            fft: FftPlanner::new().plan_fft_forward(N_FFT),
            window: hamming(N_FFT),
        }
    }

    pub fn power(&self, samples: &[f32]) -> Result<PowerSpectrogram> {
        let n_frames = frame_count(samples.len()).ok_or_else(|| {
            Error::TooShort(format!(
                "{} samples is shorter than one {N_FFT}-sample window",
                samples.len()
            ))
        })?;
        let mut values = Matrix::zeros(N_BINS, n_frames);
        let mut buf = vec![Complex::new(0.0, 0.0); N_FFT];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for f in 0..n_frames {
            let frame = &samples[f * HOP..f * HOP + N_FFT];
            for ((c, &s), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
                *c = Complex::new(f64::from(s) * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (b, c) in buf.iter().take(N_BINS).enumerate() {
                values.set(b, f, c.norm_sqr() as f32);
            }
        }
        Ok(PowerSpectrogram { values })
    }
}

/// Power spectrogram of a clip; see [`Stft::power`].
pub fn stft_power(clip: &WaveClip) -> Result<PowerSpectrogram> {
    Stft::new().power(&clip.samples)
}
