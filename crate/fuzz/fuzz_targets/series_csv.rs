#![no_main]

use libfuzzer_sys::fuzz_target;
use svir_control::io::series::{read_series, write_series};

// First byte selects whether a population is supplied for count columns.
fuzz_target!(|data: &[u8]| {
    let Some((&flag, body)) = data.split_first() else {
        return;
    };
    let population = (flag & 1 == 1).then_some(60_360_000.0);
    if let Ok(series) = read_series(body, population) {
        let text = write_series(&series);
        let again = read_series(text.as_bytes(), None).expect("written series must parse");
        assert_eq!(again.len(), series.len());
    }
});
