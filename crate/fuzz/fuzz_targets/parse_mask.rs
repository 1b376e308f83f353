#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mask) = cpspan::data::parse_mask(text, "fuzz") {
        assert!(mask.rows().into_iter().all(|r| r.iter().any(|&b| b)));
    }
});
