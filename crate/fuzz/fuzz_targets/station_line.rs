#![no_main]

use libfuzzer_sys::fuzz_target;
use tump::io::parse_station_line;

fuzz_target!(|data: &str| {
    if let Ok(record) = parse_station_line(data) {
        let text = serde_json::to_string(&record).unwrap();
        let again = parse_station_line(&text).unwrap();
        assert_eq!(again.bs, record.bs);
        assert_eq!(again.technology, record.technology);
    }
});
