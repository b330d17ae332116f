//! Phase-vocoder time stretching.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::dsp::{resample_linear, WaveClip};
use crate::error::{Error, Result};

pub const STRETCH_N_FFT: usize = 1024;
pub const STRETCH_HOP: usize = 256;
pub(crate) const MAX_SHIFT: f64 = 3.5;

fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

fn wrap_phase(p: f64) -> f64 {
    p - 2.0 * PI * ((p + PI) / (2.0 * PI)).floor()
}

/// Stretches `x` by `rate` without changing pitch. Output length is
/// `round(len / rate)`.
fn stretch_samples(x: &[f32], rate: f64) -> Vec<f32> {
    let n_fft = STRETCH_N_FFT;
    let hop = STRETCH_HOP;
    let bins = n_fft / 2 + 1;
    let out_len = (x.len() as f64 / rate).round() as usize;
    if x.is_empty() || out_len == 0 {
        return vec![0.0; out_len];
    }
    let window = hann(n_fft);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n_fft);
    let inv = planner.plan_fft_inverse(n_fft);

    // centred analysis frames over a zero-padded signal
    let pad = n_fft / 2;
    let mut padded = vec![0f64; x.len() + 2 * pad];
    for (p, &s) in padded[pad..].iter_mut().zip(x) {
        *p = f64::from(s);
    }
    let n_frames = 1 + (padded.len() - n_fft) / hop;
    let mut spec: Vec<Vec<Complex<f64>>> = Vec::with_capacity(n_frames + 2);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    for f in 0..n_frames {
        for (i, c) in buf.iter_mut().enumerate() {
            *c = Complex::new(padded[f * hop + i] * window[i], 0.0);
        }
        fwd.process(&mut buf);
        spec.push(buf[..bins].to_vec());
    }
    spec.push(vec![Complex::new(0.0, 0.0); bins]);
    spec.push(vec![Complex::new(0.0, 0.0); bins]);

    let advance: Vec<f64> = (0..bins).map(|k| 2.0 * PI * k as f64 * hop as f64 / n_fft as f64).collect();
    let mut phase: Vec<f64> = spec[0].iter().map(|c| c.arg()).collect();

    let steps: Vec<f64> = (0..).map(|k| k as f64 * rate).take_while(|&t| t < n_frames as f64).collect();
    let synth_len = n_fft + hop * (steps.len().saturating_sub(1));
    let mut y = vec![0f64; synth_len];
    let mut wsum = vec![0f64; synth_len];
    let mut col = vec![Complex::new(0.0, 0.0); n_fft];
    for (s, &t) in steps.iter().enumerate() {
        let i0 = t.floor() as usize;
        let alpha = t - i0 as f64;
        let (c0, c1) = (&spec[i0], &spec[i0 + 1]);
        for k in 0..bins {
            let mag = (1.0 - alpha) * c0[k].norm() + alpha * c1[k].norm();
            col[k] = Complex::from_polar(mag, phase[k]);
            let dphase = wrap_phase(c1[k].arg() - c0[k].arg() - advance[k]);
            phase[k] += advance[k] + dphase;
        }
        // Hermitian completion for a real inverse transform
        col[0].im = 0.0;
        col[bins - 1].im = 0.0;
        for k in bins..n_fft {
            col[k] = col[n_fft - k].conj();
        }
        inv.process(&mut col);
        let base = s * hop;
        for i in 0..n_fft {
            y[base + i] += col[i].re / n_fft as f64 * window[i];
            wsum[base + i] += window[i] * window[i];
        }
    }
    let floor = f64::from(f32::MIN_POSITIVE);
    (0..out_len)
        .map(|i| {
            let j = i + pad;
            if j < synth_len && wsum[j] > floor {
                (y[j] / wsum[j]) as f32
            } else {
                0.0
            }
        })
        .collect()
}

/// Phase-vocoder time stretch; `rate > 1` shortens the clip, pitch is kept.
/// Analysis and synthesis use a 1024-point Hann STFT with a 256-sample hop,
/// reading analysis frames at fractional positions `k · rate`.
pub fn time_stretch(clip: &WaveClip, rate: f64) -> Result<WaveClip> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::contract(format!("stretch rate must be positive, got {rate}")));
    }
    Ok(clip.with_samples(stretch_samples(&clip.samples, rate)))
}

/// Shifts pitch by `semitones` (within ±3.5) while keeping the duration:
/// stretch by `2^(−semitones/12)` then resample back to the original length.
pub fn pitch_shift(clip: &WaveClip, semitones: f64) -> Result<WaveClip> {
    if !(-MAX_SHIFT..=MAX_SHIFT).contains(&semitones) {
        return Err(Error::contract(format!(
            "pitch shift {semitones} semitones outside ±{MAX_SHIFT}"
        )));
    }
    if semitones == 0.0 {
        return Ok(clip.clone());
    }
    let rate = 2f64.powf(-semitones / 12.0);
    let stretched = stretch_samples(&clip.samples, rate);
    Ok(clip.with_samples(resample_linear(&stretched, clip.samples.len())))
}
