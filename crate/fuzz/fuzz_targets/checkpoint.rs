#![no_main]

use irisfuse::io::{decode_checkpoint, encode_checkpoint};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = decode_checkpoint(data) {
        let again = encode_checkpoint(&c).unwrap();
        assert_eq!(decode_checkpoint(&again).unwrap(), c);
    }
});
