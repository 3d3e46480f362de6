#![no_main]

use libfuzzer_sys::fuzz_target;
use tump::evaluation::parse_sweep_spec;

fuzz_target!(|data: &str| {
    if let Ok(spec) = parse_sweep_spec(data) {
        assert!(!spec.k_prime.is_empty() && !spec.gamma.is_empty());
    }
});
