//! Replays the checked-in fuzz seeds through the parsers with the same
//! invariants the fuzz targets assert.

use std::fs;
use std::path::{Path, PathBuf};

use acrnn::io::{
    decode_wav, parse_metadata, read_cache, read_checkpoint, write_cache, write_checkpoint, Manifest, RunConfig,
    Variant, RATE_RANGE,
};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    assert!(!paths.is_empty(), "no seeds for {target}");
    paths
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn accepted(target: &str, name: &str, ok: bool, expect_ok: &[&str]) {
    if expect_ok.contains(&name) {
        assert!(ok, "{target} seed {name} should parse");
    }
}

#[test]
fn wav_seeds() {
    for (name, bytes) in seeds("wav") {
        let decoded = decode_wav(&bytes);
        if let Ok(wav) = &decoded {
            assert!((RATE_RANGE.0..=RATE_RANGE.1).contains(&wav.sample_rate));
            assert!(wav.channels > 0);
            assert!(wav.samples.iter().all(|s| s.is_finite()));
        }
        accepted("wav", &name, decoded.is_ok(), &["pcm16_mono.wav", "float32_stereo_22k.wav", "extensible_48k.wav"]);
        if name == "no_data.wav" {
            assert!(decoded.is_err());
        }
    }
}

#[test]
fn metadata_seeds() {
    for (name, bytes) in seeds("metadata") {
        let text = String::from_utf8(bytes).unwrap();
        for variant in [Variant::Esc10, Variant::Esc50, Variant::Custom] {
            let parsed = parse_metadata(&text, variant);
            if let Ok(meta) = &parsed {
                assert!(meta.records.iter().all(|r| (r.target as usize) < meta.num_classes));
                assert_eq!(meta.class_names.len(), meta.num_classes);
            }
            if variant != Variant::Esc10 {
                accepted("metadata", &name, parsed.is_ok(), &["custom.csv", "esc50.csv"]);
            }
        }
    }
}

#[test]
fn cache_seeds() {
    for (name, bytes) in seeds("cache") {
        let parsed = read_cache(bytes.as_slice());
        if let Ok(segments) = &parsed {
            let mut out = Vec::new();
            write_cache(&mut out, segments).unwrap();
            assert_eq!(&read_cache(out.as_slice()).unwrap(), segments);
        }
        accepted("cache", &name, parsed.is_ok(), &["one_segment.lgt", "empty.lgt"]);
        if name == "truncated.lgt" {
            assert!(parsed.is_err());
        }
    }
}

#[test]
fn checkpoint_seeds() {
    for (name, bytes) in seeds("checkpoint") {
        let parsed = read_checkpoint(bytes.as_slice());
        if let Ok(ckpt) = &parsed {
            let mut out = Vec::new();
            write_checkpoint(&mut out, ckpt).unwrap();
            assert_eq!(out, bytes, "{name} does not re-encode to the same bytes");
        }
        accepted("checkpoint", &name, parsed.is_ok(), &["narrow.ckpt"]);
        if name == "header_only.ckpt" {
            assert!(parsed.is_err());
        }
    }
}

#[test]
fn config_and_manifest_seeds() {
    for (name, bytes) in seeds("config") {
        let text = String::from_utf8(bytes).unwrap();
        let cfg = RunConfig::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
    for (name, bytes) in seeds("manifest") {
        let text = String::from_utf8(bytes).unwrap();
        let manifest = Manifest::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(manifest.to_text(), text, "{name} is not in canonical form");
    }
}
