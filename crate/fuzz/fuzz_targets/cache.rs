#![no_main]
use acrnn::io::{read_cache, write_cache};
use libfuzzer_sys::fuzz_target;

// Anything the reader accepts must survive a write/read cycle unchanged.
fuzz_target!(|data: &[u8]| {
    if let Ok(segments) = read_cache(data) {
        let mut bytes = Vec::new();
        write_cache(&mut bytes, &segments).expect("accepted segments are writable");
        let again = read_cache(bytes.as_slice()).expect("written cache is readable");
        let mut bytes2 = Vec::new();
        write_cache(&mut bytes2, &again).unwrap();
        assert_eq!(bytes, bytes2);
    }
});
