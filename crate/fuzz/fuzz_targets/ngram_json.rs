#![no_main]

use libfuzzer_sys::fuzz_target;
use twistbeam::lm::{LanguageModel, NgramModel};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = NgramModel::from_json(text) {
        let prefix: Vec<String> = model.predictable_tokens().iter().take(2).cloned().collect();
        let _ = model.next_token_distribution(&prefix, 3);
        let _ = model.sequence_perplexity(&[], &prefix);
    }
});
