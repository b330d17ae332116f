#![no_main]
use acrnn::io::{decode_wav, RATE_RANGE};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(wav) = decode_wav(data) {
        assert!((RATE_RANGE.0..=RATE_RANGE.1).contains(&wav.sample_rate));
        assert!(wav.channels > 0);
        assert!(wav.samples.iter().all(|s| s.is_finite()));
    }
});
