#![no_main]

use libfuzzer_sys::fuzz_target;
use twistbeam::twist::build_distribution_from_labels;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(d) = build_distribution_from_labels(text) {
        let total: f64 = d.probs.values().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(d.probs.keys().all(|&p| p >= 2 && p <= d.n_max));
    }
});
