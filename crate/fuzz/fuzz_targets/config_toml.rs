#![no_main]

use libfuzzer_sys::fuzz_target;
use orbitrelay::harness::LoadedConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(loaded) = LoadedConfig::from_toml(text) {
        let _ = loaded.validate();
    }
});
