//! Small hand-built instances used by tests, docs and the CLI examples.

use crate::model::{StationId, Trajectory, VisitRecord};

/// Station sets of the fifteen-station, eleven-trajectory demo network.
/// Station `Bi` is `StationId(i)`.
pub const DEMO_ROUTES: [[u32; 3]; 11] = [
    [1, 4, 7],
    [2, 4, 6],
    [3, 4, 5],
    [8, 9, 11],
    [8, 9, 11],
    [9, 12, 13],
    [9, 12, 13],
    [12, 10, 14],
    [12, 10, 14],
    [10, 11, 15],
    [10, 11, 15],
];

/// The demo network: every visit lasts 60 s at 100 kbps, so with any
/// `tau > 100` every station is a bottleneck and every weight is 1/3.
pub fn demo_trajectories() -> Vec<Trajectory> {
    DEMO_ROUTES
        .iter()
        .enumerate()
        .map(|(j, route)| {
            Trajectory::new(
                j as u64 + 1,
                route
                    .iter()
                    .map(|&s| VisitRecord::new(StationId(s), 60_000, 100.0))
                    .collect(),
            )
        })
        .collect()
}
