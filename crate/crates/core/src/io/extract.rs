use std::path::Path;

use rayon::prelude::*;

use super::cache::save_cache;
use super::metadata::{ClipRecord, Metadata};
use super::wav::read_wav;
use crate::augment::{augment_clip, AugmentConfig};
use crate::dataset::Dataset;
use crate::dsp::{FeatureExtractor, LogGTSegment, WaveClip};
use crate::error::{Error, Result};

/// Counts reported by [`build_cache`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExtractSummary {
    pub clips: usize,
    pub segments: usize,
    pub augmented_segments: usize,
}

fn load_clip(record: &ClipRecord, audio_dir: &Path) -> Result<WaveClip> {
    let mut clip = read_wav(audio_dir.join(&record.filename))?;
    clip.clip_id = record.clip_id().to_string();
    clip.label = record.target;
    clip.fold = record.fold;
    Ok(clip)
}

/// Original and augmented segments of one clip; copy `k` (1-based) is
/// tagged `augmented = k`.
pub fn clip_segments(clip: &WaveClip, fx: &FeatureExtractor, augment: &AugmentConfig) -> Result<Vec<LogGTSegment>> {
    let mut out = fx.extract(clip)?;
    for (k, copy) in augment_clip(clip, augment)?.iter().enumerate() {
        let tag = u8::try_from(k + 1).map_err(|_| Error::Config("too many augmented copies".into()))?;
        out.extend(fx.extract(copy)?.into_iter().map(|s| LogGTSegment { augmented: tag, ..s }));
    }
    Ok(out)
}

/// Features for every record, ordered by clip id, then copy number, then
/// segment index. Clips are processed in parallel; the output does not
/// depend on scheduling.
pub fn extract_segments(meta: &Metadata, audio_dir: &Path, augment: &AugmentConfig) -> Result<Vec<LogGTSegment>> {
    augment.validate()?;
    let mut records: Vec<&ClipRecord> = meta.records.iter().collect();
    records.sort_by(|a, b| a.clip_id().cmp(b.clip_id()));
    let fx = FeatureExtractor::new();
    let per_clip: Vec<Vec<LogGTSegment>> = records
        .par_iter()
        .map(|r| clip_segments(&load_clip(r, audio_dir)?, &fx, augment))
        .collect::<Result<_>>()?;
    Ok(per_clip.into_iter().flatten().collect())
}

/// Extracts features for `meta` and writes them to `out` atomically.
pub fn build_cache(meta: &Metadata, audio_dir: &Path, augment: &AugmentConfig, out: &Path) -> Result<ExtractSummary> {
    let segments = extract_segments(meta, audio_dir, augment)?;
    save_cache(out, &segments)?;
    let augmented_segments = segments.iter().filter(|s| s.is_augmented()).count();
    Ok(ExtractSummary {
        clips: meta.records.len(),
        segments: segments.len(),
        augmented_segments,
    })
}

/// A dataset from cached segments. Without metadata the class count is one
/// more than the largest label.
pub fn dataset_from_segments(segments: Vec<LogGTSegment>, meta: Option<&Metadata>) -> Result<Dataset> {
    match meta {
        Some(m) => Dataset::new(segments, m.num_classes)?.with_class_names(m.class_names.clone()),
        None => {
            let k = segments.iter().map(|s| s.label as usize + 1).max().unwrap_or(0);
            Dataset::new(segments, k.max(2))
        }
    }
}
