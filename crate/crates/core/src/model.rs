//! Trajectories, visit records and the problem instance built from them.
//!
//! A trajectory's bottleneck utility is the fraction of its total connected
//! time spent on stations that are either not a bottleneck for it, or that
//! are upgraded. All threshold tests go through [`meets_threshold`] on
//! integer millisecond sums so that every module agrees bit-for-bit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Comparison slack for `W >= gamma`; lets three exact thirds reach `gamma = 1`.
pub const CMP_EPS: f64 = 1e-9;

/// Fixed-point scale for per-station weights (2^40 units == weight 1.0).
pub(crate) const WEIGHT_SCALE: u64 = 1 << 40;

/// Opaque base-station identifier. Ordering by id is the tie-break order
/// used by every solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StationId(pub u32);

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrajectoryId(pub u64);

impl fmt::Display for TrajectoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

/// One association of a user with a station along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub station: StationId,
    pub duration_ms: u64,
    pub throughput_kbps: f64,
}

impl VisitRecord {
    pub fn new(station: StationId, duration_ms: u64, throughput_kbps: f64) -> Self {
        Self {
            station,
            duration_ms,
            throughput_kbps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: TrajectoryId,
    pub visits: Vec<VisitRecord>,
}

impl Trajectory {
    pub fn new(id: u64, visits: Vec<VisitRecord>) -> Self {
        Self {
            id: TrajectoryId(id),
            visits,
        }
    }

    /// Number of distinct stations visited.
    pub fn length(&self) -> usize {
        self.visits
            .iter()
            .map(|v| v.station)
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn total_duration_ms(&self) -> u64 {
        self.visits.iter().map(|v| v.duration_ms).sum()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("trajectory set is empty")]
    NoTrajectories,
    #[error("trajectory {0} has no visits")]
    EmptyTrajectory(TrajectoryId),
    #[error("trajectory {0} has zero total duration")]
    ZeroDuration(TrajectoryId),
    #[error("trajectory {id}: visit to {station} has zero duration")]
    ZeroDurationVisit {
        id: TrajectoryId,
        station: StationId,
    },
    #[error("trajectory {id}: throughput {value} at {station} is not a finite non-negative number")]
    InvalidThroughput {
        id: TrajectoryId,
        station: StationId,
        value: f64,
    },
    #[error("gamma {0} outside [0, 1]")]
    GammaOutOfRange(f64),
    #[error("tau {0} must be a finite non-negative number")]
    InvalidTau(f64),
    #[error("trajectory index {index} out of range (m = {m})")]
    TrajectoryIndex { index: usize, m: usize },
    #[error("unknown station {0}")]
    UnknownStation(StationId),
    #[error("upgrade set of size {size} exceeds budget {budget}")]
    BudgetExceeded { size: usize, budget: usize },
}

/// Step utility: `W >= gamma` up to [`CMP_EPS`].
pub fn meets_threshold(utility: f64, gamma: f64) -> bool {
    utility >= gamma - CMP_EPS
}

/// 0/1 step utility of a bottleneck utility value.
pub fn step_utility(utility: f64, gamma: f64) -> u8 {
    u8::from(meets_threshold(utility, gamma))
}

/// One merged (trajectory, station) cell of the instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    /// Dense station index into [`ProblemInstance::stations`].
    pub station_index: usize,
    pub station: StationId,
    pub duration_ms: u64,
    pub throughput_kbps: f64,
    pub bottleneck: bool,
}

/// Immutable problem instance. Trajectory cells are stored in a flat
/// compressed layout, each trajectory's cells sorted by station id.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    stations: Vec<StationId>,
    trajectory_ids: Vec<TrajectoryId>,
    offsets: Vec<usize>,
    cell_station: Vec<u32>,
    cell_duration: Vec<u64>,
    cell_throughput: Vec<f64>,
    cell_bottleneck: Vec<bool>,
    total_ms: Vec<u64>,
    base_ms: Vec<u64>,
    lengths: Vec<usize>,
    tau_kbps: f64,
    gamma: f64,
    budget: usize,
    d_max: usize,
}

fn check_gamma(gamma: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(ModelError::GammaOutOfRange(gamma))
    }
}

/// Builds an instance: merges repeated visits, derives weights and
/// per-trajectory bottleneck flags (`throughput < tau`, strict).
pub fn build_instance(
    trajectories: &[Trajectory],
    tau_kbps: f64,
    gamma: f64,
    budget: usize,
) -> Result<ProblemInstance, ModelError> {
    if trajectories.is_empty() {
        return Err(ModelError::NoTrajectories);
    }
    check_gamma(gamma)?;
    if !tau_kbps.is_finite() || tau_kbps < 0.0 {
        return Err(ModelError::InvalidTau(tau_kbps));
    }

    // merged[j]: station -> (duration, throughput)
    let mut merged: Vec<Vec<(StationId, u64, f64)>> = Vec::with_capacity(trajectories.len());
    let mut all_stations = BTreeSet::new();
    for t in trajectories {
        if t.visits.is_empty() {
            return Err(ModelError::EmptyTrajectory(t.id));
        }
        let mut acc: BTreeMap<StationId, (u64, f64, usize, f64)> = BTreeMap::new();
        for v in &t.visits {
            if v.duration_ms == 0 {
                return Err(ModelError::ZeroDurationVisit {
                    id: t.id,
                    station: v.station,
                });
            }
            if !v.throughput_kbps.is_finite() || v.throughput_kbps < 0.0 {
                return Err(ModelError::InvalidThroughput {
                    id: t.id,
                    station: v.station,
                    value: v.throughput_kbps,
                });
            }
            let e = acc.entry(v.station).or_insert((0, 0.0, 0, v.throughput_kbps));
            e.0 += v.duration_ms;
            e.1 += v.throughput_kbps * v.duration_ms as f64;
            e.2 += 1;
        }
        let cells: Vec<_> = acc
            .into_iter()
            .map(|(s, (ms, weighted, visits, first))| {
                // a lone visit keeps its throughput bit-exact
                let kbps = if visits == 1 { first } else { weighted / ms as f64 };
                (s, ms, kbps)
            })
            .collect();
        if cells.iter().map(|c| c.1).sum::<u64>() == 0 {
            return Err(ModelError::ZeroDuration(t.id));
        }
        all_stations.extend(cells.iter().map(|c| c.0));
        merged.push(cells);
    }

    let stations: Vec<StationId> = all_stations.into_iter().collect();
    let cell_count: usize = merged.iter().map(Vec::len).sum();
    let mut inst = ProblemInstance {
        stations,
        trajectory_ids: trajectories.iter().map(|t| t.id).collect(),
        offsets: Vec::with_capacity(trajectories.len() + 1),
        cell_station: Vec::with_capacity(cell_count),
        cell_duration: Vec::with_capacity(cell_count),
        cell_throughput: Vec::with_capacity(cell_count),
        cell_bottleneck: Vec::with_capacity(cell_count),
        total_ms: Vec::with_capacity(trajectories.len()),
        base_ms: Vec::with_capacity(trajectories.len()),
        lengths: Vec::with_capacity(trajectories.len()),
        tau_kbps,
        gamma,
        budget,
        d_max: 0,
    };
    inst.offsets.push(0);
    for cells in merged {
        let mut total = 0u64;
        let mut base = 0u64;
        for (s, ms, kbps) in &cells {
            let idx = inst
                .stations
                .binary_search(s)
                .expect("station collected above");
            let bottleneck = *kbps < tau_kbps;
            inst.cell_station.push(idx as u32);
            inst.cell_duration.push(*ms);
            inst.cell_throughput.push(*kbps);
            inst.cell_bottleneck.push(bottleneck);
            total += ms;
            if !bottleneck {
                base += ms;
            }
        }
        inst.total_ms.push(total);
        inst.base_ms.push(base);
        inst.lengths.push(cells.len());
        inst.d_max = inst.d_max.max(cells.len());
        inst.offsets.push(inst.cell_station.len());
    }
    Ok(inst)
}

impl ProblemInstance {
    /// Number of stations `n`.
    pub fn n(&self) -> usize {
        self.stations.len()
    }

    /// Number of trajectories `m`.
    pub fn m(&self) -> usize {
        self.trajectory_ids.len()
    }

    pub fn stations(&self) -> &[StationId] {
        &self.stations
    }

    pub fn trajectory_ids(&self) -> &[TrajectoryId] {
        &self.trajectory_ids
    }

    pub fn tau_kbps(&self) -> f64 {
        self.tau_kbps
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    /// Distinct-station length of trajectory `j`.
    pub fn length(&self, j: usize) -> usize {
        self.lengths[j]
    }

    pub fn total_ms(&self, j: usize) -> u64 {
        self.total_ms[j]
    }

    /// Time on stations that are not a bottleneck for trajectory `j`.
    pub fn base_ms(&self, j: usize) -> u64 {
        self.base_ms[j]
    }

    pub fn station_index(&self, id: StationId) -> Option<usize> {
        self.stations.binary_search(&id).ok()
    }

    /// Same trajectories and flags, new `gamma` and budget.
    pub fn with_params(&self, gamma: f64, budget: usize) -> Result<Self, ModelError> {
        check_gamma(gamma)?;
        let mut out = self.clone();
        out.gamma = gamma;
        out.budget = budget;
        Ok(out)
    }

    pub fn with_budget(&self, budget: usize) -> Self {
        let mut out = self.clone();
        out.budget = budget;
        out
    }

    pub(crate) fn cell_range(&self, j: usize) -> std::ops::Range<usize> {
        self.offsets[j]..self.offsets[j + 1]
    }

    pub(crate) fn cell_station(&self, c: usize) -> usize {
        self.cell_station[c] as usize
    }

    pub(crate) fn cell_duration(&self, c: usize) -> u64 {
        self.cell_duration[c]
    }

    pub(crate) fn cell_bottleneck(&self, c: usize) -> bool {
        self.cell_bottleneck[c]
    }

    pub fn entries(&self, j: usize) -> impl Iterator<Item = Entry> + '_ {
        self.cell_range(j).map(move |c| Entry {
            station_index: self.cell_station[c] as usize,
            station: self.stations[self.cell_station[c] as usize],
            duration_ms: self.cell_duration[c],
            throughput_kbps: self.cell_throughput[c],
            bottleneck: self.cell_bottleneck[c],
        })
    }

    fn find_cell(&self, j: usize, station: StationId) -> Option<usize> {
        let idx = self.station_index(station)? as u32;
        let range = self.cell_range(j);
        self.cell_station[range.clone()]
            .binary_search(&idx)
            .ok()
            .map(|p| range.start + p)
    }

    /// Time-fraction weight `w_ji`; `None` when the station is not on `T_j`.
    pub fn weight(&self, j: usize, station: StationId) -> Option<f64> {
        self.find_cell(j, station)
            .map(|c| self.cell_duration[c] as f64 / self.total_ms[j] as f64)
    }

    /// Bottleneck flag `b_ji`; `None` when the station is not on `T_j`.
    pub fn is_bottleneck(&self, j: usize, station: StationId) -> Option<bool> {
        self.find_cell(j, station).map(|c| self.cell_bottleneck[c])
    }

    /// Threshold test on covered milliseconds of trajectory `j`.
    pub(crate) fn meets(&self, j: usize, covered_ms: u64) -> bool {
        meets_threshold(
            covered_ms as f64 / self.total_ms[j] as f64,
            self.gamma,
        )
    }

    /// Fixed-point weight of cell `c` in trajectory `j`.
    pub(crate) fn cell_weight_units(&self, j: usize, c: usize) -> u64 {
        let total = self.total_ms[j] as u128;
        ((self.cell_duration[c] as u128 * WEIGHT_SCALE as u128 + total / 2) / total) as u64
    }

    /// Dense membership mask for a set of station ids.
    pub fn mask_of(&self, set: &BTreeSet<StationId>) -> Result<Vec<bool>, ModelError> {
        let mut mask = vec![false; self.n()];
        for s in set {
            let i = self.station_index(*s).ok_or(ModelError::UnknownStation(*s))?;
            mask[i] = true;
        }
        Ok(mask)
    }

    pub(crate) fn covered_ms(&self, j: usize, upgraded: &[bool]) -> u64 {
        self.base_ms[j]
            + self
                .cell_range(j)
                .filter(|&c| self.cell_bottleneck[c] && upgraded[self.cell_station[c] as usize])
                .map(|c| self.cell_duration[c])
                .sum::<u64>()
    }

    /// Keeps the trajectories flagged in `keep`; the station set is unchanged.
    pub(crate) fn retain_trajectories(&self, keep: &[bool]) -> Self {
        let mut out = ProblemInstance {
            stations: self.stations.clone(),
            trajectory_ids: Vec::new(),
            offsets: vec![0],
            cell_station: Vec::new(),
            cell_duration: Vec::new(),
            cell_throughput: Vec::new(),
            cell_bottleneck: Vec::new(),
            total_ms: Vec::new(),
            base_ms: Vec::new(),
            lengths: Vec::new(),
            tau_kbps: self.tau_kbps,
            gamma: self.gamma,
            budget: self.budget,
            d_max: 0,
        };
        for j in (0..self.m()).filter(|&j| keep[j]) {
            let r = self.cell_range(j);
            out.trajectory_ids.push(self.trajectory_ids[j]);
            out.cell_station.extend_from_slice(&self.cell_station[r.clone()]);
            out.cell_duration.extend_from_slice(&self.cell_duration[r.clone()]);
            out.cell_throughput.extend_from_slice(&self.cell_throughput[r.clone()]);
            out.cell_bottleneck.extend_from_slice(&self.cell_bottleneck[r]);
            out.total_ms.push(self.total_ms[j]);
            out.base_ms.push(self.base_ms[j]);
            out.lengths.push(self.lengths[j]);
            out.d_max = out.d_max.max(self.lengths[j]);
            out.offsets.push(out.cell_station.len());
        }
        out
    }
}

/// Bottleneck utility `W_j` of trajectory `j` under the given upgrades.
pub fn trajectory_utility(
    instance: &ProblemInstance,
    j: usize,
    upgraded: &BTreeSet<StationId>,
) -> Result<f64, ModelError> {
    if j >= instance.m() {
        return Err(ModelError::TrajectoryIndex {
            index: j,
            m: instance.m(),
        });
    }
    let mask = instance.mask_of(upgraded)?;
    Ok(instance.covered_ms(j, &mask) as f64 / instance.total_ms(j) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpgradeSolution {
    pub upgraded: BTreeSet<StationId>,
    pub per_trajectory_utility: Vec<f64>,
    pub satisfied_count: usize,
    pub satisfied_fraction: f64,
}

/// Scores an upgrade set against the instance, enforcing the budget.
pub fn evaluate_solution(
    instance: &ProblemInstance,
    upgraded: &BTreeSet<StationId>,
) -> Result<UpgradeSolution, ModelError> {
    if upgraded.len() > instance.budget() {
        return Err(ModelError::BudgetExceeded {
            size: upgraded.len(),
            budget: instance.budget(),
        });
    }
    evaluate_unbudgeted(instance, upgraded)
}

/// Scores an upgrade set without the budget check (seeded incremental runs
/// legitimately exceed the per-call budget).
pub fn evaluate_unbudgeted(
    instance: &ProblemInstance,
    upgraded: &BTreeSet<StationId>,
) -> Result<UpgradeSolution, ModelError> {
    let mask = instance.mask_of(upgraded)?;
    let mut utilities = Vec::with_capacity(instance.m());
    let mut satisfied = 0;
    for j in 0..instance.m() {
        let covered = instance.covered_ms(j, &mask);
        let w = covered as f64 / instance.total_ms(j) as f64;
        if meets_threshold(w, instance.gamma()) {
            satisfied += 1;
        }
        utilities.push(w);
    }
    Ok(UpgradeSolution {
        upgraded: upgraded.clone(),
        per_trajectory_utility: utilities,
        satisfied_count: satisfied,
        satisfied_fraction: satisfied as f64 / instance.m() as f64,
    })
}
