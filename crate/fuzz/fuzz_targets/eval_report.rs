#![no_main]

use libfuzzer_sys::fuzz_target;
use owah::bench::EvalReport;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = EvalReport::from_json(text) {
        let _ = report.check_speedups();
        let _ = report.f1_csv();
    }
});
