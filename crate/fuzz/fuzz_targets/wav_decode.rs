#![no_main]

use libfuzzer_sys::fuzz_target;

use dsff_core::audio_io::{decode_wav, encode_wav, BitDepth};

fuzz_target!(|data: &[u8]| {
    if let Ok(audio) = decode_wav(data) {
        // Anything we accept must survive our own writer.
        let bytes = encode_wav(&audio, BitDepth::Pcm16);
        let again = decode_wav(&bytes).expect("re-encoded wav must decode");
        assert_eq!(again.len(), audio.len());
        assert_eq!(again.sample_rate(), audio.sample_rate());
    }
});
