#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(x) = cpspan::data::parse_matrix(text, "fuzz") {
        // anything accepted must print and parse back to the same bits
        let back = cpspan::data::parse_matrix(&cpspan::data::format_matrix(&x), "fuzz").unwrap();
        assert_eq!(x.dim(), back.dim());
        assert!(x.iter().zip(back.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
});
