#![no_main]

use libfuzzer_sys::fuzz_target;
use orbitrelay::harness::RunManifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(manifest) = serde_json::from_slice::<RunManifest>(data) {
        let _ = manifest.tree.into_tree();
    }
});
