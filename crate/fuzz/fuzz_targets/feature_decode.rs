#![no_main]

use libfuzzer_sys::fuzz_target;

use dsff_core::feature_store::{decode_feature, encode_feature};

fuzz_target!(|data: &[u8]| {
    if let Ok(seq) = decode_feature(data) {
        // Accepted payloads round-trip bit-exactly through our encoder.
        let bytes = encode_feature(&seq).expect("decoded feature must re-encode");
        let again = decode_feature(&bytes).expect("re-encoded feature must decode");
        assert_eq!(again, seq);
    }
});
