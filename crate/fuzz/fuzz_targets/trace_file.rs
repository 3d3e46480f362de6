#![no_main]

use libfuzzer_sys::fuzz_target;
use tump::io::{read_trace, write_trace};

// whole-file path: registry building, duplicate detection, instance build
fuzz_target!(|data: &[u8]| {
    let Ok(trace) = read_trace(data, None) else { return };
    let mut out = Vec::new();
    write_trace(&mut out, &trace.trajectories, None, &trace.registry).unwrap();
    let again = read_trace(out.as_slice(), None).unwrap();
    assert_eq!(again.trajectories, trace.trajectories);
    if let Ok(inst) = tump::build_instance(&trace.trajectories, 750.0, 1.0, 0) {
        let _ = tump::solve_decg(&inst.with_budget(inst.n().min(2)), &Default::default());
    }
});
