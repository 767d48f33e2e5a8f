#![no_main]

use libfuzzer_sys::fuzz_target;
use robustsum::sim::wire::Payload;
use robustsum::sim::MessageKind;

// First byte picks the message kind, the rest is the payload.
fuzz_target!(|data: &[u8]| {
    let Some((&k, bytes)) = data.split_first() else { return };
    let kind = MessageKind::ALL[k as usize % MessageKind::ALL.len()];
    if let Ok(p) = Payload::decode(kind, bytes) {
        assert_eq!(p.kind(), kind);
    }
});
