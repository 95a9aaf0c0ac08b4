#![no_main]

use libfuzzer_sys::fuzz_target;
use owah::worldsim::{SceneDoc, SceneGraph};

fuzz_target!(|data: &[u8]| {
    let Ok(doc) = serde_json::from_slice::<SceneDoc>(data) else { return };
    if let Ok(scene) = SceneGraph::from_doc(&doc) {
        // accepted scenes survive a round trip unchanged
        let again = SceneGraph::from_doc(&scene.to_doc()).expect("round trip");
        assert_eq!(again.state_hash(), scene.state_hash());
    }
});
