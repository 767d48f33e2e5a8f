#![no_main]

use libfuzzer_sys::fuzz_target;
use robustsum::sim::Scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = Scenario::from_toml_str(text) {
        let again = Scenario::from_toml_str(&s.to_toml().unwrap()).unwrap();
        assert_eq!(again, s);
    }
});
