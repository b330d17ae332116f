#![no_main]
use acrnn::io::{read_checkpoint, write_checkpoint};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ckpt) = read_checkpoint(data) {
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &ckpt).expect("accepted checkpoint is writable");
        let again = read_checkpoint(bytes.as_slice()).expect("written checkpoint is readable");
        let mut bytes2 = Vec::new();
        write_checkpoint(&mut bytes2, &again).unwrap();
        assert_eq!(bytes, bytes2);
    }
});
