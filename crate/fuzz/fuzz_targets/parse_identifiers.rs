#![no_main]

use libfuzzer_sys::fuzz_target;
use robustsum::sim::{ClientId, MessageKind, PartyId};
use robustsum::Seed;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = text.parse::<PartyId>() {
        assert_eq!(p.to_string().parse::<PartyId>().unwrap(), p);
    }
    let _ = text.parse::<MessageKind>();
    let _ = ClientId::parse(text);
    if let Some(s) = Seed::from_hex(text) {
        assert_eq!(Seed::from_hex(&s.to_hex()), Some(s));
    }
});
