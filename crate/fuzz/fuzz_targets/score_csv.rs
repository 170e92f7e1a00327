#![no_main]

use irisfuse::io::{format_scores, parse_scores};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_scores(text) {
        let again = format_scores(&rows).unwrap();
        assert_eq!(parse_scores(std::str::from_utf8(&again).unwrap()).unwrap(), rows);
    }
});
