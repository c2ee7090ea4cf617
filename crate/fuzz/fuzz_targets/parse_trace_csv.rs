#![no_main]

use adhesion_lab::trace::{parse_trace_csv, trace_to_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_trace_csv(s) {
        let text = trace_to_csv(&rows);
        let again = parse_trace_csv(&text).expect("re-parse of emitted trace");
        assert_eq!(trace_to_csv(&again), text);
    }
});
