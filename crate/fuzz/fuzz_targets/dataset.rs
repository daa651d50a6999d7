#![no_main]

use libfuzzer_sys::fuzz_target;
use wra_core::learn_opt::parse_dataset;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = parse_dataset(data) {
        let bytes = d.to_bytes().expect("parsed dataset must serialize");
        assert_eq!(parse_dataset(&bytes).expect("serialized dataset must parse"), d);
    }
});
