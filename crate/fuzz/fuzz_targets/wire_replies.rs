#![no_main]

use libfuzzer_sys::fuzz_target;
use twistbeam::lm::wire::{decode_next_token_reply, decode_perplexity_reply, decode_trigger_reply};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(d) = decode_next_token_reply(text) {
        assert!(d.logprobs().windows(2).all(|w| w[0] >= w[1]));
    }
    if let Ok(p) = decode_perplexity_reply(text) {
        assert!(p > 0.0);
    }
    if let Ok(p) = decode_trigger_reply(text) {
        assert!((0.0..=1.0).contains(&p));
    }
});
