#![no_main]

use libfuzzer_sys::fuzz_target;
use svir_control::io::series::read_annotations;

fuzz_target!(|data: &[u8]| {
    let _ = read_annotations(data);
});
