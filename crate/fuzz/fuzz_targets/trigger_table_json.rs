#![no_main]

use libfuzzer_sys::fuzz_target;
use twistbeam::bandit::{TableTrigger, TriggerPredictor};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = TableTrigger::from_json(text) {
        let p = table.likelihood(&["the".to_string()]).unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
});
