#![no_main]

use libfuzzer_sys::fuzz_target;
use wra_harness::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::parse(text) {
        let resolved = cfg.resolved();
        RunConfig::parse(&resolved.to_toml()).expect("resolved config must parse");
    }
});
