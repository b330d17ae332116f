use super::{LogGTSegment, CHANNELS};
use crate::error::{Error, Result};

/// Per-channel scalar mean and standard deviation over a training set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormStats {
    pub mean: [f32; CHANNELS],
    pub std: [f32; CHANNELS],
}

impl NormStats {
    pub const IDENTITY: NormStats = NormStats {
        mean: [0.0; CHANNELS],
        std: [1.0; CHANNELS],
    };

    /// Population statistics over every value of every segment.
    pub fn compute<'a>(segments: impl IntoIterator<Item = &'a LogGTSegment>) -> Result<Self> {
        let segments: Vec<&LogGTSegment> = segments.into_iter().collect();
        let count: usize = segments.iter().map(|s| s.values.len() / CHANNELS).sum();
        if count == 0 {
            return Err(Error::ZeroStd("no training segments to normalize over".into()));
        }
        let mut mean = [0f64; CHANNELS];
        for px in segments.iter().flat_map(|s| s.values.chunks_exact(CHANNELS)) {
            for c in 0..CHANNELS {
                mean[c] += f64::from(px[c]);
            }
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        let mut var = [0f64; CHANNELS];
        for px in segments.iter().flat_map(|s| s.values.chunks_exact(CHANNELS)) {
            for c in 0..CHANNELS {
                let d = f64::from(px[c]) - mean[c];
                var[c] += d * d;
            }
        }
        let mut stats = NormStats::IDENTITY;
        for c in 0..CHANNELS {
            let std = (var[c] / count as f64).sqrt() as f32;
            if std.is_nan() || std <= 0.0 {
                return Err(Error::ZeroStd(format!("channel {c} has zero standard deviation")));
            }
            stats.mean[c] = mean[c] as f32;
            stats.std[c] = std;
        }
        Ok(stats)
    }

    /// `(x − mean_c) / std_c` in place.
    pub fn apply(&self, segment: &mut LogGTSegment) {
        for px in segment.values.chunks_exact_mut(CHANNELS) {
            for ((v, m), s) in px.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
    }

    pub fn applied(&self, segment: &LogGTSegment) -> LogGTSegment {
        let mut s = segment.clone();
        self.apply(&mut s);
        s
    }
}
