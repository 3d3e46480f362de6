#![no_main]

use libfuzzer_sys::fuzz_target;
use tump::io::parse_trace_line;

fuzz_target!(|data: &str| {
    if let Ok(record) = parse_trace_line(data) {
        let text = serde_json::to_string(&record).unwrap();
        assert_eq!(parse_trace_line(&text).unwrap(), record);
    }
});
