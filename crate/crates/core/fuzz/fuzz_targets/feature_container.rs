#![no_main]

use libfuzzer_sys::fuzz_target;
use meshff::features::{decode_features, encode_features};

fuzz_target!(|data: &[u8]| {
    if let Ok(f) = decode_features(data) {
        let bytes = encode_features(&f);
        let again = decode_features(&bytes).expect("encoded container decodes");
        assert_eq!(encode_features(&again), bytes);
    }
});
