#![no_main]

use irisfuse::io::{decode_template, encode_template};
use libfuzzer_sys::fuzz_target;

// The format has exactly one encoding per template, so anything that decodes
// must re-encode to the same bytes.
fuzz_target!(|data: &[u8]| {
    if let Ok(t) = decode_template(data) {
        assert_eq!(encode_template(&t).unwrap(), data);
    }
});
