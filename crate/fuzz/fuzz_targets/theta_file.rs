#![no_main]

use libfuzzer_sys::fuzz_target;
use seqregret::markov::MarkovParams;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(params) = MarkovParams::parse(text) {
        let again = MarkovParams::parse(&params.to_text()).expect("written theta file must parse");
        assert_eq!(again.memory(), params.memory());
    }
});
