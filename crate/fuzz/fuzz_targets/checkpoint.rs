#![no_main]

use libfuzzer_sys::fuzz_target;
use wra_core::nn::{parse_checkpoint, Activation, MlpParams};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_checkpoint(text);
    if let Ok(p) = MlpParams::from_checkpoint(text, Activation::relu()) {
        let again = MlpParams::from_checkpoint(&p.to_checkpoint(), Activation::relu()).expect("written checkpoint must load");
        assert_eq!(p.to_checkpoint(), again.to_checkpoint());
    }
});
