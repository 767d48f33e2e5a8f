#![no_main]

use libfuzzer_sys::fuzz_target;
use robustsum::experiment::ExperimentGrid;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = ExperimentGrid::from_toml_str(text) {
        let _ = g.points();
    }
});
