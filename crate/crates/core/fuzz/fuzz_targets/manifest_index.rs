#![no_main]

use libfuzzer_sys::fuzz_target;
use meshff::datasets::parse_index;

fuzz_target!(|data: &[u8]| {
    if let Ok(entries) = parse_index(data) {
        for e in entries {
            assert!(!e.id.is_empty());
            assert!(!e.path.starts_with('/'));
        }
    }
});
