#![no_main]

use libfuzzer_sys::fuzz_target;
use twistbeam::pipeline::{parse_stories_jsonl, stories_to_jsonl};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(stories) = parse_stories_jsonl(text) {
        for s in &stories {
            let _ = s.twist_sentence();
            let _ = s.to_plain_text();
        }
        let _ = stories_to_jsonl(&stories);
    }
});
