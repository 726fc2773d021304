#![no_main]

use libfuzzer_sys::fuzz_target;
use meshff::ops::PoolHistory;

fuzz_target!(|data: &[u8]| {
    // from_json replays the journal, so anything accepted must map consistently
    if let Ok(h) = PoolHistory::from_json(data) {
        let avg = h.averaging_map();
        let up = h.unpool_map();
        assert_eq!(avg.output_rows(), h.final_edge_count);
        assert_eq!(up.output_rows(), h.initial_edge_count);
        let _ = h.removal_steps();
    }
});
