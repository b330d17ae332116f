#![no_main]
use acrnn::io::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(cfg) = RunConfig::parse(text) {
        let written = cfg.to_text();
        let again = RunConfig::parse(&written).expect("written config parses");
        assert_eq!(written, again.to_text());
    }
});
