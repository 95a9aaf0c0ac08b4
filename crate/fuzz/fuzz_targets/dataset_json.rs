#![no_main]

use libfuzzer_sys::fuzz_target;
use owah::bench::Dataset;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(dataset) = Dataset::from_json(text) {
        let _ = dataset.gpn_examples();
    }
});
