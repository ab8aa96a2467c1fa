#![no_main]

use libfuzzer_sys::fuzz_target;

use dsff_core::config::PipelineConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = PipelineConfig::parse(text) {
            // Whatever parses must survive a dump/reload cycle.
            let dumped = cfg.dump();
            PipelineConfig::parse(&dumped).expect("dumped config must re-parse");
        }
    }
});
