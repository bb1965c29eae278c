#![no_main]

use libfuzzer_sys::fuzz_target;
use twistbeam::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = Config::from_json(text) {
        let again = Config::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(cfg.fingerprint(), again.fingerprint());
    }
});
