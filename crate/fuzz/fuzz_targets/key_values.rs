#![no_main]

use libfuzzer_sys::fuzz_target;
use seqregret::io::KeyValues;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(kv) = KeyValues::parse(text) {
        assert_eq!(KeyValues::parse(&kv.to_text()).expect("written pairs must parse"), kv);
    }
});
