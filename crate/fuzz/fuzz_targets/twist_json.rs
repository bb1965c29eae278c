#![no_main]

use libfuzzer_sys::fuzz_target;
use twistbeam::twist::TwistDistribution;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(d) = TwistDistribution::from_json(text) {
        let again = TwistDistribution::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(d, again);
        let pos = twistbeam::twist::sample_position(&d, data.len() as u64);
        assert!((2..=d.n_max).contains(&pos));
    }
});
