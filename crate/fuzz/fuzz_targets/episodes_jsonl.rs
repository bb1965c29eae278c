#![no_main]

use libfuzzer_sys::fuzz_target;
use twistbeam::bandit::{parse_episodes, recorded_regret};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(steps) = parse_episodes(text) {
        if let Ok(r) = recorded_regret(&steps, &[10, 30, 60]) {
            assert!(r >= 0.0 || r.is_nan());
        }
    }
});
