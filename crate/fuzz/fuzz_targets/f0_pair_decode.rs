#![no_main]

use libfuzzer_sys::fuzz_target;

use dsff_core::feature_store::decode_feature;
use dsff_core::prosody::f0_from_features;

// Input layout: 4-byte little-endian length of the first blob, then the two
// serialized feature files back to back (an F0 value track and its voicing
// mask, when well-formed).
fuzz_target!(|data: &[u8]| {
    if data.len() < 4 {
        return;
    }
    let split = u32::from_le_bytes([data[0], data[1], data[2], data[3]]) as usize;
    let rest = &data[4..];
    if split > rest.len() {
        return;
    }
    let (a, b) = rest.split_at(split);
    if let (Ok(values), Ok(voicing)) = (decode_feature(a), decode_feature(b)) {
        if let Ok(track) = f0_from_features(&values, &voicing) {
            // Voiced frames carry positive frequencies, unvoiced carry zero.
            for (v, voiced) in track.values.iter().zip(&track.voiced) {
                assert!(if *voiced { *v > 0.0 } else { *v == 0.0 });
            }
        }
    }
});
