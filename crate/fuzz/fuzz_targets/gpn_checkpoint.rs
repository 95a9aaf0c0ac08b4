#![no_main]

use libfuzzer_sys::fuzz_target;
use owah::gpn::GpnParams;

fuzz_target!(|data: &[u8]| {
    if let Ok(params) = GpnParams::from_bytes(data, None) {
        assert_eq!(params.to_bytes(), data);
    }
});
