#![no_main]

use libfuzzer_sys::fuzz_target;
use tump::evaluation::{compare_report, read_sweep_csv, sweep_to_string};

fuzz_target!(|data: &[u8]| {
    if let Ok(result) = read_sweep_csv(data) {
        let text = sweep_to_string(&result);
        let again = read_sweep_csv(text.as_bytes()).unwrap();
        assert_eq!(sweep_to_string(&again), text);
        let _ = compare_report(&result);
    }
});
