#![no_main]

use libfuzzer_sys::fuzz_target;
use svir_control::io::trajectory::read_trajectory;

fuzz_target!(|data: &[u8]| {
    let _ = read_trajectory(data);
});
