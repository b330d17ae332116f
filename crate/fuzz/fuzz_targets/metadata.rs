#![no_main]
use acrnn::io::{parse_metadata, Variant};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    for variant in [Variant::Esc10, Variant::Esc50, Variant::Custom] {
        if let Ok(meta) = parse_metadata(text, variant) {
            assert!(meta.records.iter().all(|r| (r.target as usize) < meta.num_classes));
            assert_eq!(meta.class_names.len(), meta.num_classes);
        }
    }
});
