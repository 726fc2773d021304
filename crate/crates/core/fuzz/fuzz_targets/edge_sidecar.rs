#![no_main]

use libfuzzer_sys::fuzz_target;
use meshff::datasets::parse_edge_labels;
use meshff::mesh::parse_edge_scalars;

fuzz_target!(|data: &[u8]| {
    let _ = parse_edge_scalars(data);
    if let Ok(labels) = parse_edge_labels(data) {
        for ([i, j], _) in labels {
            assert!(i < j);
        }
    }
});
