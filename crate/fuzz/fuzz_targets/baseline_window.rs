#![no_main]

use libfuzzer_sys::fuzz_target;
use svir_control::BaselineWindow;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(w) = text.parse::<BaselineWindow>() {
            assert!(w.start < w.end);
        }
    }
});
