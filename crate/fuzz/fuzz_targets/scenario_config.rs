#![no_main]

use libfuzzer_sys::fuzz_target;
use tump::io::{config_hash, parse_scenario_config};

fuzz_target!(|data: &str| {
    if let Ok(config) = parse_scenario_config(data) {
        let _ = config.validate();
        let _ = config_hash(&config);
    }
});
