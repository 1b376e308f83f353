#![no_main]

use cpspan::nn::checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ae) = checkpoint::parse(text) {
        assert_eq!(checkpoint::parse(&checkpoint::to_string(&ae)).unwrap(), ae);
    }
});
