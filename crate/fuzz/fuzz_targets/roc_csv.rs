#![no_main]

use irisfuse::io::{format_roc, parse_roc};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(points) = parse_roc(text) {
        let again = format_roc(&points).unwrap();
        assert_eq!(parse_roc(std::str::from_utf8(&again).unwrap()).unwrap(), points);
    }
});
