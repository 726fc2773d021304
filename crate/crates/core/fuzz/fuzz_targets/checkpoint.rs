#![no_main]

use libfuzzer_sys::fuzz_target;
use meshff::nn::{decode_checkpoint, encode_checkpoint};

fuzz_target!(|data: &[u8]| {
    if let Ok(ckpt) = decode_checkpoint(data) {
        let bytes = encode_checkpoint(&ckpt);
        let again = decode_checkpoint(&bytes).expect("encoded checkpoint decodes");
        // compare bytes; NaN weights defeat PartialEq
        assert_eq!(encode_checkpoint(&again), bytes);
    }
});
