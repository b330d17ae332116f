/// Mono waveform with its class label and cross-validation fold.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub label: u32,
    pub fold: u8,
    pub clip_id: String,
}

impl WaveClip {
    pub fn new(clip_id: impl Into<String>, samples: Vec<f32>, sample_rate: u32, label: u32, fold: u8) -> Self {
        WaveClip {
            samples,
            sample_rate,
            label,
            fold,
            clip_id: clip_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Same metadata, different samples.
    pub fn with_samples(&self, samples: Vec<f32>) -> Self {
        WaveClip {
            samples,
            sample_rate: self.sample_rate,
            label: self.label,
            fold: self.fold,
            clip_id: self.clip_id.clone(),
        }
    }
}
