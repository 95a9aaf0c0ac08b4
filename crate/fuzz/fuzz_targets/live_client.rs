#![no_main]

use std::sync::{Arc, LazyLock};

use libfuzzer_sys::fuzz_target;
use owah::baselines::HelperResources;
use owah::bench::{generate_dataset, DatasetManifest, Split};
use owah_live::{Connection, LiveService, ServerMessage};

static SERVICE: LazyLock<Arc<LiveService>> = LazyLock::new(|| {
    let data = generate_dataset(&DatasetManifest::new(Split::Test, 1, 0)).unwrap();
    Arc::new(LiveService::new([data], HelperResources::default()))
});

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // one connection per input; each line is a message
    let mut conn = Connection::new(SERVICE.clone());
    for line in text.lines() {
        let reply = conn.handle_text(line);
        let json = reply.to_json();
        serde_json::from_str::<ServerMessage>(&json).expect("replies decode");
    }
});
