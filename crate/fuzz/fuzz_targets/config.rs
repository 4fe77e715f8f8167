#![no_main]

use libfuzzer_sys::fuzz_target;
use svir_control::io::config::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ScenarioConfig::from_toml_str(text) {
            assert!(cfg.params.validate().is_ok());
        }
    }
});
