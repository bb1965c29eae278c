#![no_main]

use libfuzzer_sys::fuzz_target;
use twistbeam::bandit::LinUcbState;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mut state) = LinUcbState::from_json(text) {
        let x = vec![0.5; state.dim()];
        if let Ok(arm) = state.select_arm(&x) {
            let _ = state.update_arm(arm, &x, 0.1);
        }
    }
});
