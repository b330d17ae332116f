use super::{
    GammatoneFilterbank, Matrix, PowerSpectrogram, Stft, WaveClip, CHANNELS, DELTA_HALF_WINDOW, LOG_EPSILON,
    N_BANDS, SEGMENT_FRAMES, SEGMENT_HOP, SEGMENT_LEN,
};
use crate::error::{Error, Result};

/// One `128(bands) × 128(frames) × 2(static, delta)` network input, stored
/// row-major in `(band, frame, channel)` order.
#[derive(Clone, Debug, PartialEq)]
pub struct LogGTSegment {
    pub clip_id: String,
    pub index: u32,
    pub label: u32,
    pub fold: u8,
    /// 0 for features of the original clip, otherwise the 1-based number of
    /// the augmented copy they came from.
    pub augmented: u8,
    pub values: Vec<f32>,
}

impl LogGTSegment {
    pub const SHAPE: [usize; 3] = [N_BANDS, SEGMENT_FRAMES, CHANNELS];

    #[inline]
    pub fn offset(band: usize, frame: usize, channel: usize) -> usize {
        (band * SEGMENT_FRAMES + frame) * CHANNELS + channel
    }

    pub fn get(&self, band: usize, frame: usize, channel: usize) -> f32 {
        self.values[Self::offset(band, frame, channel)]
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented != 0
    }
}

/// `log10(fb · spec + 1e-10)`: band energies on a log scale, bands × frames.
pub fn log_gt(spec: &PowerSpectrogram, fb: &GammatoneFilterbank) -> Result<Matrix> {
    if spec.n_bins() != fb.n_bins() {
        return Err(Error::dim(format!(
            "spectrogram has {} bins but filterbank expects {}",
            spec.n_bins(),
            fb.n_bins()
        )));
    }
    let n_frames = spec.n_frames();
    let mut energy = vec![0f64; fb.n_bands() * n_frames];
    for b in 0..fb.n_bands() {
        let acc = &mut energy[b * n_frames..(b + 1) * n_frames];
        for (k, &w) in fb.weights.row(b).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let w = f64::from(w);
            for (a, &p) in acc.iter_mut().zip(spec.values.row(k)) {
                *a += w * f64::from(p);
            }
        }
    }
    let data = energy.iter().map(|&e| (e + LOG_EPSILON).log10() as f32).collect();
    Ok(Matrix::from_vec(fb.n_bands(), n_frames, data))
}

/// Regression delta along the frame axis with half-window 2:
/// `d_t = Σ_{n=1..2} n·(x_{t+n} − x_{t−n}) / (2·Σ n²)`, with edge frames
/// replicated.
pub fn delta(logspec: &Matrix) -> Result<Matrix> {
    let n = logspec.cols();
    let min_frames = 2 * DELTA_HALF_WINDOW + 1;
    if n < min_frames {
        return Err(Error::TooShort(format!(
            "delta needs at least {min_frames} frames, got {n}"
        )));
    }
    let denom: f64 = 2.0 * (1..=DELTA_HALF_WINDOW).map(|k| (k * k) as f64).sum::<f64>();
    let mut out = Matrix::zeros(logspec.rows(), n);
    for r in 0..logspec.rows() {
        let row = logspec.row(r);
        let at = |i: isize| f64::from(row[i.clamp(0, n as isize - 1) as usize]);
        let dst = out.row_mut(r);
        for (t, d) in dst.iter_mut().enumerate() {
            let t = t as isize;
            let s: f64 = (1..=DELTA_HALF_WINDOW as isize)
                .map(|k| k as f64 * (at(t + k) - at(t - k)))
                .sum();
            *d = (s / denom) as f32;
        }
    }
    Ok(out)
}

/// Cuts static and delta spectrograms into 128-frame segments with a 64-frame
/// hop. Fewer than 128 frames are zero-padded into a single segment.
pub fn segment(
    static_: &Matrix,
    delta: &Matrix,
    clip_id: &str,
    label: u32,
    fold: u8,
) -> Result<Vec<LogGTSegment>> {
    if static_.rows() != N_BANDS || delta.rows() != N_BANDS {
        return Err(Error::dim(format!(
            "segments need {N_BANDS} bands, got {} and {}",
            static_.rows(),
            delta.rows()
        )));
    }
    if static_.cols() != delta.cols() {
        return Err(Error::dim(format!(
            "static has {} frames but delta has {}",
            static_.cols(),
            delta.cols()
        )));
    }
    let n = static_.cols();
    let count = if n >= SEGMENT_FRAMES {
        (n - SEGMENT_FRAMES) / SEGMENT_HOP + 1
    } else {
        1
    };
    let mut out = Vec::with_capacity(count);
    for s in 0..count {
        let start = s * SEGMENT_HOP;
        let mut values = vec![0f32; SEGMENT_LEN];
        for b in 0..N_BANDS {
            let (sr, dr) = (static_.row(b), delta.row(b));
            for f in 0..SEGMENT_FRAMES.min(n - start) {
                values[LogGTSegment::offset(b, f, 0)] = sr[start + f];
                values[LogGTSegment::offset(b, f, 1)] = dr[start + f];
            }
        }
        out.push(LogGTSegment {
            clip_id: clip_id.to_string(),
            index: s as u32,
            label,
            fold,
            augmented: 0,
            values,
        });
    }
    Ok(out)
}

/// Shared STFT plan and filterbank; cheap to share across threads.
#[derive(Clone, Debug, Default)]
pub struct FeatureExtractor {
    stft: Stft,
    filterbank: GammatoneFilterbank,
}

impl FeatureExtractor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn filterbank(&self) -> &GammatoneFilterbank {
        &self.filterbank
    }

    pub fn stft(&self) -> &Stft {
        &self.stft
    }

    /// Full pipeline for one clip. Deltas are taken over the whole clip
    /// before segmentation.
    pub fn extract(&self, clip: &WaveClip) -> Result<Vec<LogGTSegment>> {
        let spec = self.stft.power(&clip.samples)?;
        let stat = log_gt(&spec, &self.filterbank)?;
        let d = delta(&stat)?;
        segment(&stat, &d, &clip.clip_id, clip.label, clip.fold)
    }
}
