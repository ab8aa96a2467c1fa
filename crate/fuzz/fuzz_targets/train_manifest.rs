#![no_main]

use libfuzzer_sys::fuzz_target;

use dsff_core::manifest::parse_train_manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(records) = parse_train_manifest(text) {
            for r in records {
                assert!(!r.label.is_empty());
                assert!(!r.sources.is_empty());
            }
        }
    }
});
