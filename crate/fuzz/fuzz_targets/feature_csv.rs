#![no_main]

use irisfuse::io::{format_features, parse_features};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = parse_features(text) {
        let again = format_features(&table).unwrap();
        assert_eq!(parse_features(std::str::from_utf8(&again).unwrap()).unwrap(), table);
    }
});
