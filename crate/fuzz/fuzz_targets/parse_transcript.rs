#![no_main]

use libfuzzer_sys::fuzz_target;
use robustsum::sim::transcript::TranscriptFile;
use robustsum::sim::Transcript;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = TranscriptFile::parse(text);
    if let Ok(t) = Transcript::from_ndjson(text) {
        assert_eq!(Transcript::from_ndjson(&t.to_ndjson(true)).unwrap(), t);
    }
});
