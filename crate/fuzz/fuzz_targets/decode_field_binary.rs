#![no_main]

use libfuzzer_sys::fuzz_target;
use qhdturb::exchange::{decode_binary, encode_binary};

fuzz_target!(|data: &[u8]| {
    if let Ok(field) = decode_binary(data) {
        assert_eq!(decode_binary(&encode_binary(&field)).unwrap(), field);
    }
});
