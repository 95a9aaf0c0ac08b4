#![no_main]

use libfuzzer_sys::fuzz_target;
use owah::episode::EpisodeRecord;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(record) = EpisodeRecord::from_jsonl(text) {
        let _ = record.replay();
        assert_eq!(EpisodeRecord::from_jsonl(&record.to_jsonl()).expect("round trip"), record);
    }
});
