//! File formats: WAV audio, dataset metadata, the feature cache, model
//! checkpoints, run configuration and run manifests.

mod bytes;
mod cache;
mod checkpoint;
mod config;
mod extract;
mod manifest;
mod metadata;
mod wav;


pub use cache::{encode_segment, load_cache, read_cache, save_cache, write_cache, CACHE_MAGIC, CACHE_VERSION};
pub use checkpoint::{
    checkpoint_from_tensors, load_checkpoint, read_checkpoint, read_tensors, save_checkpoint, write_checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION, MAX_ELEMENTS, MAX_RANK,
};
pub use config::{parse_pairs, ModelPreset, RunConfig, MANIFEST_PREFIX};
pub use extract::{build_cache, clip_segments, dataset_from_segments, extract_segments, ExtractSummary};
pub use manifest::Manifest;
pub use metadata::{load_metadata, parse_metadata, ClipRecord, Metadata, Variant, MAX_FOLD};
pub use wav::{decode_wav, encode_f32, encode_pcm16, read_wav, write_pcm16, SampleFormat, WavData, RATE_RANGE};
