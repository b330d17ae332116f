use crate::autodiff::Tensor;
use crate::dsp::{LogGTSegment, NormStats, SEGMENT_LEN};
use crate::error::{Error, Result};
use crate::model::{predict, ACRNNConfig, ModelParams};

/// Segments per inference batch.
pub const INFER_BATCH: usize = 16;

/// Index of the largest entry; the lowest index wins ties. NaN entries never
/// win.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] || values[best].is_nan() && !v.is_nan() {
            best = i;
        }
    }
    best
}

/// Mean of per-segment probability vectors and its [`argmax`].
pub fn average_probabilities(rows: &[Vec<f32>]) -> Result<(usize, Vec<f32>)> {
    let first = rows
        .first()
        .ok_or_else(|| Error::contract("a clip prediction needs at least one segment"))?;
    let k = first.len();
    let mut sum = vec![0f64; k];
    for row in rows {
        if row.len() != k {
            return Err(Error::dim(format!("probability rows of length {k} and {}", row.len())));
        }
        for (s, &p) in sum.iter_mut().zip(row) {
            *s += f64::from(p);
        }
    }
    let mean: Vec<f32> = sum.iter().map(|s| (s / rows.len() as f64) as f32).collect();
    Ok((argmax(&mean), mean))
}

/// Normalized copies of `segments` stacked into an `N×F×T×C` batch.
pub(crate) fn stack(segments: &[&LogGTSegment], norm: &NormStats) -> Result<Tensor<f32>> {
    let mut data = Vec::with_capacity(segments.len() * SEGMENT_LEN);
    for s in segments {
        if s.values.len() != SEGMENT_LEN {
            return Err(Error::dim(format!(
                "segment {}#{} has {} values, expected {SEGMENT_LEN}",
                s.clip_id,
                s.index,
                s.values.len()
            )));
        }
        data.extend_from_slice(&norm.applied(s).values);
    }
    let mut shape = vec![segments.len()];
    shape.extend_from_slice(&LogGTSegment::SHAPE);
    Tensor::new(&shape, data)
}

/// Inference-mode class probabilities for each segment, after normalizing
/// with `norm`.
pub fn segment_probabilities(
    cfg: &ACRNNConfig,
    params: &ModelParams<f32>,
    norm: &NormStats,
    segments: &[&LogGTSegment],
) -> Result<Vec<Vec<f32>>> {
    let k = cfg.num_classes;
    let mut out = Vec::with_capacity(segments.len());
    for chunk in segments.chunks(INFER_BATCH) {
        let probs = predict(cfg, params, &stack(chunk, norm)?)?;
        out.extend(probs.data().chunks_exact(k).map(<[f32]>::to_vec));
    }
    Ok(out)
}

/// Clip-level prediction: the argmax of the mean segment probability vector.
pub fn predict_clip(
    cfg: &ACRNNConfig,
    params: &ModelParams<f32>,
    norm: &NormStats,
    segments: &[&LogGTSegment],
) -> Result<(usize, Vec<f32>)> {
    if segments.is_empty() {
        return Err(Error::contract("a clip prediction needs at least one segment"));
    }
    average_probabilities(&segment_probabilities(cfg, params, norm, segments)?)
}
