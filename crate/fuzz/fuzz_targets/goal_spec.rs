#![no_main]

use libfuzzer_sys::fuzz_target;
use owah::goals::GoalSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(goal) = GoalSpec::from_json(text) {
        assert_eq!(GoalSpec::from_json(&goal.to_json()).expect("round trip"), goal);
    }
});
