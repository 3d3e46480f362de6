//! Shared helpers for integration tests: random instances and a brute-force
//! oracle that works from the raw visit records, not from `ProblemInstance`.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use tump::rng::{Phase, ScenarioRng};
use tump::{StationId, Trajectory, VisitRecord};

pub const TAU: f64 = 750.0;

pub struct RandomShape {
    pub max_n: usize,
    pub max_m: usize,
    pub max_len: usize,
    /// Probability that a visit is a bottleneck.
    pub bottleneck_p: f64,
}

pub const SMALL: RandomShape = RandomShape {
    max_n: 15,
    max_m: 30,
    max_len: 5,
    bottleneck_p: 0.7,
};

/// Random trajectories over stations `B0..B{n-1}`. Visits may repeat a
/// station; durations are small integers so ties are common.
pub fn random_trajectories(rng: &mut ScenarioRng, shape: &RandomShape) -> Vec<Trajectory> {
    let n = 2 + rng.below(shape.max_n - 1);
    let m = 1 + rng.below(shape.max_m);
    (0..m)
        .map(|j| {
            let len = 1 + rng.below(shape.max_len);
            let visits = (0..len)
                .map(|_| {
                    let station = StationId(rng.below(n) as u32);
                    let duration = 1 + rng.below(6) as u64 * 1000;
                    let kbps = if rng.chance(shape.bottleneck_p) {
                        rng.range(20.0, 700.0).round()
                    } else {
                        rng.range(750.0, 2000.0).round()
                    };
                    VisitRecord::new(station, duration, kbps)
                })
                .collect();
            Trajectory::new(j as u64, visits)
        })
        .collect()
}

/// Every visit a bottleneck, no repeated stations, `m` trajectories over
/// `n` stations.
pub fn all_bottleneck(rng: &mut ScenarioRng, n: usize, m: usize, max_len: usize) -> Vec<Trajectory> {
    (0..m)
        .map(|j| {
            let len = 1 + rng.below(max_len.min(n));
            let mut pool: Vec<u32> = (0..n as u32).collect();
            for i in 0..len {
                let k = i + rng.below(n - i);
                pool.swap(i, k);
            }
            let visits = pool[..len]
                .iter()
                .map(|&s| VisitRecord::new(StationId(s), 1000 * (1 + rng.below(5) as u64), 100.0))
                .collect();
            Trajectory::new(j as u64, visits)
        })
        .collect()
}

pub fn rng(seed: u64) -> ScenarioRng {
    ScenarioRng::new(seed, Phase::Mesh)
}

/// Utility of one trajectory with `upgraded`, from the raw visits.
pub fn oracle_utility(t: &Trajectory, tau: f64, upgraded: &BTreeSet<StationId>) -> f64 {
    // merge repeated visits: summed time, time-weighted throughput
    let mut merged: BTreeMap<StationId, (u64, f64)> = BTreeMap::new();
    for v in &t.visits {
        let e = merged.entry(v.station).or_insert((0, 0.0));
        e.0 += v.duration_ms;
        e.1 += v.duration_ms as f64 * v.throughput_kbps;
    }
    let total: u64 = merged.values().map(|e| e.0).sum();
    let good: u64 = merged
        .iter()
        .filter(|(s, (d, weighted))| upgraded.contains(s) || weighted / *d as f64 >= tau)
        .map(|(_, (d, _))| *d)
        .sum();
    good as f64 / total as f64
}

pub fn oracle_count(ts: &[Trajectory], tau: f64, gamma: f64, upgraded: &BTreeSet<StationId>) -> usize {
    ts.iter()
        .filter(|t| oracle_utility(t, tau, upgraded) >= gamma - 1e-9)
        .count()
}

pub fn stations_of(ts: &[Trajectory]) -> Vec<StationId> {
    let set: BTreeSet<StationId> = ts.iter().flat_map(|t| t.visits.iter().map(|v| v.station)).collect();
    set.into_iter().collect()
}

/// Best count over every subset of size exactly `min(k, n)`.
pub fn oracle_best(ts: &[Trajectory], tau: f64, gamma: f64, k: usize) -> usize {
    let stations = stations_of(ts);
    let k = k.min(stations.len());
    let mut best = 0;
    let mut pick = Vec::with_capacity(k);
    fn walk(
        start: usize,
        k: usize,
        stations: &[StationId],
        pick: &mut Vec<StationId>,
        best: &mut usize,
        ts: &[Trajectory],
        tau: f64,
        gamma: f64,
    ) {
        if pick.len() == k {
            let set: BTreeSet<StationId> = pick.iter().copied().collect();
            *best = (*best).max(oracle_count(ts, tau, gamma, &set));
            return;
        }
        for i in start..stations.len() {
            if stations.len() - i < k - pick.len() {
                break;
            }
            pick.push(stations[i]);
            walk(i + 1, k, stations, pick, best, ts, tau, gamma);
            pick.pop();
        }
    }
    walk(0, k, &stations, &mut pick, &mut best, ts, tau, gamma);
    best
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
