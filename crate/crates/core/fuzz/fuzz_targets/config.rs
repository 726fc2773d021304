#![no_main]

use libfuzzer_sys::fuzz_target;
use meshff::pipelines::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = ExperimentConfig::parse(text) {
        let canonical = config.to_text();
        let again = ExperimentConfig::parse(&canonical).expect("canonical text parses");
        assert_eq!(again.hash(), config.hash());
        let _ = config.layers();
    }
});
