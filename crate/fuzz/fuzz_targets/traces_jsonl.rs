#![no_main]

use libfuzzer_sys::fuzz_target;
use twistbeam::decoder::{parse_traces_jsonl, trace_statistics};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(traces) = parse_traces_jsonl(text) {
        if let Ok(stats) = trace_statistics(&traces, &[10, 30, 60]) {
            for row in &stats.transitions {
                let total: f64 = row.iter().sum();
                assert!(total == 0.0 || (total - 1.0).abs() < 1e-9);
            }
        }
    }
});
