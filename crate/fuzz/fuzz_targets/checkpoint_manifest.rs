#![no_main]

use libfuzzer_sys::fuzz_target;
use orbitrelay::snn::CheckpointManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(manifest) = CheckpointManifest::from_json(text) {
        let _ = manifest.validate();
    }
});
