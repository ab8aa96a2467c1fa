#![no_main]

use libfuzzer_sys::fuzz_target;

use dsff_core::manifest::parse_eval_manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(records) = parse_eval_manifest(text) {
            for r in records {
                // Metric inputs are all-or-nothing pairs.
                assert_eq!(r.converted_mel.is_some(), r.reference_mel.is_some());
                assert_eq!(r.converted_f0.is_some(), r.reference_f0.is_some());
                assert_eq!(r.hyp_transcript.is_some(), r.ref_transcript.is_some());
                assert_eq!(r.converted_embedding.is_some(), r.reference_embedding.is_some());
            }
        }
    }
});
