#![no_main]
use acrnn::io::Manifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(manifest) = Manifest::parse(text) {
        let written = manifest.to_text();
        let again = Manifest::parse(&written).expect("written manifest parses");
        assert_eq!(written, again.to_text());
    }
});
