//! Upgrade-set selection: the bottleneck-weight baseline (SimG), greedy
//! addition (IncG), greedy deletion with pruning (DecG), and an exhaustive
//! exact search used as a referee at small sizes.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypergraph::{build_hypergraph, HyperGraph};
use crate::model::{
    evaluate_unbudgeted, ModelError, ProblemInstance, StationId, TrajectoryId, UpgradeSolution,
};

/// Default limit on the number of subsets the exact search will visit.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Bottleneck-weights closer than this many fixed-point units compare equal,
/// so that e.g. one weight of 1 ties with three weights of 1/3.
const TIE_UNITS: u64 = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    SimG,
    IncG,
    DecG,
    Exact,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::SimG, Algorithm::IncG, Algorithm::DecG, Algorithm::Exact];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::SimG => "simg",
            Algorithm::IncG => "incg",
            Algorithm::DecG => "decg",
            Algorithm::Exact => "exact",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "simg" => Ok(Algorithm::SimG),
            "incg" => Ok(Algorithm::IncG),
            "decg" => Ok(Algorithm::DecG),
            "exact" => Ok(Algorithm::Exact),
            other => Err(format!("unknown algorithm `{other}` (expected simg, incg, decg or exact)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("budget {budget} exceeds the {available} available stations")]
    BudgetTooLarge { budget: usize, available: usize },
    #[error("exact search refused: {subsets} subsets exceed the enumeration cap of {cap}")]
    EnumerationCap { subsets: u128, cap: u64 },
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub solution: UpgradeSolution,
    pub algorithm: Algorithm,
    /// IncG: additions in order. DecG: deletions in order. Others: the final
    /// set in id order.
    pub selection_order: Vec<StationId>,
    pub pruned_trajectories: Vec<TrajectoryId>,
    pub elapsed: Duration,
}

fn cmp_weight(a: u64, b: u64) -> Ordering {
    if a.abs_diff(b) <= TIE_UNITS {
        Ordering::Equal
    } else {
        a.cmp(&b)
    }
}

fn finish(
    instance: &ProblemInstance,
    algorithm: Algorithm,
    upgraded: &[bool],
    selection_order: Vec<StationId>,
    pruned_trajectories: Vec<TrajectoryId>,
    start: Instant,
) -> Result<SolverReport, SolveError> {
    let set: BTreeSet<StationId> = instance
        .stations()
        .iter()
        .zip(upgraded)
        .filter(|(_, &on)| on)
        .map(|(s, _)| *s)
        .collect();
    let solution = evaluate_unbudgeted(instance, &set)?;
    Ok(SolverReport {
        solution,
        algorithm,
        selection_order,
        pruned_trajectories,
        elapsed: start.elapsed(),
    })
}

/// Flags trajectories that cannot reach `gamma` even with their `budget`
/// heaviest bottleneck stations upgraded.
fn infeasible_mask(instance: &ProblemInstance, budget: usize) -> Vec<bool> {
    let mut durations = Vec::new();
    (0..instance.m())
        .map(|j| {
            durations.clear();
            durations.extend(
                instance
                    .cell_range(j)
                    .filter(|&c| instance.cell_bottleneck(c))
                    .map(|c| instance.cell_duration(c)),
            );
            durations.sort_unstable_by(|a, b| b.cmp(a));
            let best: u64 = durations.iter().take(budget).sum();
            !instance.meets(j, instance.base_ms(j) + best)
        })
        .collect()
}

/// Removes trajectories that no choice of `budget` stations can satisfy.
/// Returns the filtered instance (trajectories re-indexed, stations kept)
/// and the ids that were removed.
pub fn prune_infeasible(instance: &ProblemInstance) -> (ProblemInstance, Vec<TrajectoryId>) {
    let infeasible = infeasible_mask(instance, instance.budget());
    let pruned = pruned_ids(instance, &infeasible);
    let keep: Vec<bool> = infeasible.iter().map(|x| !x).collect();
    (instance.retain_trajectories(&keep), pruned)
}

fn pruned_ids(instance: &ProblemInstance, flags: &[bool]) -> Vec<TrajectoryId> {
    instance
        .trajectory_ids()
        .iter()
        .zip(flags)
        .filter(|(_, &f)| f)
        .map(|(id, _)| *id)
        .collect()
}

fn check_budget(budget: usize, available: usize) -> Result<(), SolveError> {
    if budget > available {
        Err(SolveError::BudgetTooLarge { budget, available })
    } else {
        Ok(())
    }
}

/// SimG: the `k` candidates with the largest bottleneck-weights, ties to the
/// higher station id.
pub fn solve_simg(instance: &ProblemInstance) -> Result<SolverReport, SolveError> {
    let start = Instant::now();
    let k = instance.budget();
    check_budget(k, instance.n())?;
    let graph = build_hypergraph(instance);

    let mut chosen = vec![false; instance.n()];
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for v in (0..instance.n()).filter(|&v| !chosen[v] && graph.is_candidate(v)) {
            best = match best {
                None => Some(v),
                Some(b) => match cmp_weight(graph.weight_units(v), graph.weight_units(b)) {
                    Ordering::Greater => Some(v),
                    // ascending scan: a later index wins ties
                    Ordering::Equal => Some(v),
                    Ordering::Less => Some(b),
                },
            };
        }
        match best {
            Some(v) => chosen[v] = true,
            None => break,
        }
    }
    let order = instance
        .stations()
        .iter()
        .zip(&chosen)
        .filter(|(_, &c)| c)
        .map(|(s, _)| *s)
        .collect();
    finish(instance, Algorithm::SimG, &chosen, order, Vec::new(), start)
}

/// IncG: starting from `initial_upgraded`, adds `k` stations one at a time,
/// each maximising the number of trajectories that newly reach `gamma`.
/// Ties go to the larger bottleneck-weight, then the higher station id.
pub fn solve_incg(
    instance: &ProblemInstance,
    initial_upgraded: &BTreeSet<StationId>,
) -> Result<SolverReport, SolveError> {
    let start = Instant::now();
    let k = instance.budget();
    let n = instance.n();
    let m = instance.m();
    check_budget(initial_upgraded.len() + k, n)?;
    let graph = build_hypergraph(instance);
    let mut in_set = instance.mask_of(initial_upgraded)?;

    let mut covered: Vec<u64> = (0..m).map(|j| instance.covered_ms(j, &in_set)).collect();
    let mut satisfied: Vec<bool> = (0..m).map(|j| instance.meets(j, covered[j])).collect();
    let mut gain = vec![0i64; n];
    for j in (0..m).filter(|&j| !satisfied[j]) {
        add_gain(instance, j, covered[j], &in_set, &mut gain, 1);
    }

    let mut order = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for v in (0..n).filter(|&v| !in_set[v] && graph.is_candidate(v)) {
            best = match best {
                None => Some(v),
                Some(b) => {
                    let key = gain[v]
                        .cmp(&gain[b])
                        .then_with(|| cmp_weight(graph.weight_units(v), graph.weight_units(b)));
                    if key == Ordering::Less {
                        Some(b)
                    } else {
                        Some(v)
                    }
                }
            };
        }
        let Some(v) = best else { break };
        in_set[v] = true;
        order.push(instance.stations()[v]);
        for inc in graph.incidence(v).iter().filter(|i| i.bottleneck) {
            let j = inc.trajectory;
            if !satisfied[j] {
                add_gain(instance, j, covered[j], &in_set, &mut gain, -1);
            }
            covered[j] += instance.cell_duration(inc.cell);
            satisfied[j] = instance.meets(j, covered[j]);
            if !satisfied[j] {
                add_gain(instance, j, covered[j], &in_set, &mut gain, 1);
            }
        }
    }

    let pruned = pruned_ids(instance, &infeasible_mask(instance, initial_upgraded.len() + k));
    finish(instance, Algorithm::IncG, &in_set, order, pruned, start)
}

/// Adds `sign` to the gain of every unselected bottleneck station on an
/// unsatisfied trajectory `j` whose upgrade alone would make `j` reach gamma.
fn add_gain(
    instance: &ProblemInstance,
    j: usize,
    covered: u64,
    in_set: &[bool],
    gain: &mut [i64],
    sign: i64,
) {
    for c in instance.cell_range(j) {
        let u = instance.cell_station(c);
        if instance.cell_bottleneck(c)
            && !in_set[u]
            && instance.meets(j, covered + instance.cell_duration(c))
        {
            gain[u] += sign;
        }
    }
}

/// Extra inputs for DecG's incremental use.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecgOptions {
    /// Stations already deleted by an earlier run; they start outside the set.
    pub frozen_removed: BTreeSet<StationId>,
    /// Stations already upgraded; they count towards the budget and are
    /// never deleted.
    pub locked: BTreeSet<StationId>,
}

/// DecG starting from every candidate except `frozen_removed`.
pub fn solve_decg(
    instance: &ProblemInstance,
    frozen_removed: &BTreeSet<StationId>,
) -> Result<SolverReport, SolveError> {
    solve_decg_with(
        instance,
        &DecgOptions {
            frozen_removed: frozen_removed.clone(),
            locked: BTreeSet::new(),
        },
    )
}

struct DecgState<'a> {
    instance: &'a ProblemInstance,
    in_set: Vec<bool>,
    covered: Vec<u64>,
    live: Vec<bool>,
    loss: Vec<u32>,
    weight: Vec<u64>,
}

impl DecgState<'_> {
    /// Adds (`add = true`) or withdraws trajectory `j`'s share of loss and
    /// live bottleneck-weight for the stations it has in the set.
    fn contribute(&mut self, j: usize, add: bool) {
        let inst = self.instance;
        for c in inst.cell_range(j) {
            let u = inst.cell_station(c);
            if !inst.cell_bottleneck(c) || !self.in_set[u] {
                continue;
            }
            let w = inst.cell_weight_units(j, c);
            let critical = !inst.meets(j, self.covered[j] - inst.cell_duration(c));
            if add {
                self.weight[u] += w;
                self.loss[u] += u32::from(critical);
            } else {
                self.weight[u] -= w;
                self.loss[u] -= u32::from(critical);
            }
        }
    }
}

/// DecG: deletes stations one at a time until `k` remain, each time the one
/// whose removal loses the fewest still-feasible trajectories. Trajectories
/// that can no longer reach gamma are pruned after every deletion. Ties go
/// to the smaller bottleneck-weight over live trajectories, then the lower
/// station id.
pub fn solve_decg_with(
    instance: &ProblemInstance,
    options: &DecgOptions,
) -> Result<SolverReport, SolveError> {
    let start = Instant::now();
    let k = instance.budget();
    let n = instance.n();
    let m = instance.m();
    check_budget(k, n - options.frozen_removed.len().min(n))?;
    let frozen = instance.mask_of(&options.frozen_removed)?;
    let locked = instance.mask_of(&options.locked)?;
    if options.locked.iter().any(|s| options.frozen_removed.contains(s)) {
        return Err(SolveError::InvalidOptions(
            "a station cannot be both locked and removed".into(),
        ));
    }
    if options.locked.len() > k {
        return Err(SolveError::InvalidOptions(format!(
            "{} locked stations exceed the budget {k}",
            options.locked.len()
        )));
    }
    let graph = build_hypergraph(instance);

    let in_set: Vec<bool> = (0..n)
        .map(|v| locked[v] || (graph.is_candidate(v) && !frozen[v]))
        .collect();
    let covered: Vec<u64> = (0..m).map(|j| instance.covered_ms(j, &in_set)).collect();
    let live: Vec<bool> = (0..m).map(|j| instance.meets(j, covered[j])).collect();
    let mut pruned: Vec<TrajectoryId> = pruned_ids(
        instance,
        &live.iter().map(|l| !l).collect::<Vec<_>>(),
    );
    let mut state = DecgState {
        instance,
        in_set,
        covered,
        live,
        loss: vec![0; n],
        weight: vec![0; n],
    };
    for j in 0..m {
        if state.live[j] {
            state.contribute(j, true);
        }
    }

    let mut size = state.in_set.iter().filter(|&&x| x).count();
    let mut order = Vec::with_capacity(size.saturating_sub(k));
    while size > k {
        let mut best: Option<usize> = None;
        for v in (0..n).filter(|&v| state.in_set[v] && !locked[v]) {
            best = match best {
                None => Some(v),
                Some(b) => {
                    let key = state.loss[v]
                        .cmp(&state.loss[b])
                        .then_with(|| cmp_weight(state.weight[v], state.weight[b]));
                    // ascending scan: an earlier index wins ties
                    if key == Ordering::Less {
                        Some(v)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let Some(v) = best else { break };

        let incident: Vec<_> = graph
            .incidence(v)
            .iter()
            .filter(|i| i.bottleneck)
            .copied()
            .collect();
        for inc in &incident {
            if state.live[inc.trajectory] {
                state.contribute(inc.trajectory, false);
            }
        }
        state.in_set[v] = false;
        size -= 1;
        order.push(instance.stations()[v]);
        for inc in &incident {
            let j = inc.trajectory;
            state.covered[j] -= instance.cell_duration(inc.cell);
            if state.live[j] {
                if instance.meets(j, state.covered[j]) {
                    state.contribute(j, true);
                } else {
                    state.live[j] = false;
                    pruned.push(instance.trajectory_ids()[j]);
                }
            }
        }
    }

    finish(instance, Algorithm::DecG, &state.in_set, order, pruned, start)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        match acc.checked_mul((n - i) as u128) {
            Some(x) => acc = x / (i as u128 + 1),
            None => return u128::MAX,
        }
    }
    acc
}

struct ExactSearch<'a> {
    instance: &'a ProblemInstance,
    graph: HyperGraph,
    candidates: Vec<usize>,
    covered: Vec<u64>,
    count: usize,
    chosen: Vec<usize>,
    pick: usize,
    best: Option<(usize, Vec<usize>)>,
}

impl ExactSearch<'_> {
    fn toggle(&mut self, v: usize, add: bool) {
        let inst = self.instance;
        for inc in self.graph.incidence(v).iter().filter(|i| i.bottleneck) {
            let j = inc.trajectory;
            let before = inst.meets(j, self.covered[j]);
            let d = inst.cell_duration(inc.cell);
            if add {
                self.covered[j] += d;
            } else {
                self.covered[j] -= d;
            }
            let after = inst.meets(j, self.covered[j]);
            if before != after {
                if after {
                    self.count += 1;
                } else {
                    self.count -= 1;
                }
            }
        }
    }

    fn search(&mut self, from: usize) {
        if self.chosen.len() == self.pick {
            if self.best.as_ref().is_none_or(|(c, _)| self.count > *c) {
                self.best = Some((self.count, self.chosen.clone()));
            }
            return;
        }
        let remaining = self.pick - self.chosen.len();
        for i in from..=self.candidates.len() - remaining {
            let v = self.candidates[i];
            self.toggle(v, true);
            self.chosen.push(v);
            self.search(i + 1);
            self.chosen.pop();
            self.toggle(v, false);
        }
    }
}

pub fn solve_exact(instance: &ProblemInstance) -> Result<SolverReport, SolveError> {
    solve_exact_capped(instance, DEFAULT_ENUMERATION_CAP)
}

/// Exhaustive search over `k`-subsets of candidate stations. Among optimal
/// sets the lexicographically smallest (by station id) is returned.
pub fn solve_exact_capped(
    instance: &ProblemInstance,
    cap: u64,
) -> Result<SolverReport, SolveError> {
    let start = Instant::now();
    let k = instance.budget();
    check_budget(k, instance.n())?;
    let graph = build_hypergraph(instance);
    let candidates: Vec<usize> = (0..instance.n()).filter(|&v| graph.is_candidate(v)).collect();
    let pick = k.min(candidates.len());
    let subsets = binomial(candidates.len(), pick);
    if subsets > cap as u128 {
        return Err(SolveError::EnumerationCap { subsets, cap });
    }
    let covered = (0..instance.m()).map(|j| instance.base_ms(j)).collect::<Vec<_>>();
    let count = (0..instance.m())
        .filter(|&j| instance.meets(j, covered[j]))
        .count();
    let mut search = ExactSearch {
        instance,
        graph,
        candidates,
        covered,
        count,
        chosen: Vec::with_capacity(pick),
        pick,
        best: None,
    };
    search.search(0);
    let (_, best) = search.best.expect("at least the empty or full subset is visited");
    let mut mask = vec![false; instance.n()];
    for v in best {
        mask[v] = true;
    }
    let order = instance
        .stations()
        .iter()
        .zip(&mask)
        .filter(|(_, &c)| c)
        .map(|(s, _)| *s)
        .collect();
    finish(instance, Algorithm::Exact, &mask, order, Vec::new(), start)
}

/// Runs `algorithm` from scratch with default options.
pub fn solve(
    instance: &ProblemInstance,
    algorithm: Algorithm,
    enumeration_cap: u64,
) -> Result<SolverReport, SolveError> {
    match algorithm {
        Algorithm::SimG => solve_simg(instance),
        Algorithm::IncG => solve_incg(instance, &BTreeSet::new()),
        Algorithm::DecG => solve_decg(instance, &BTreeSet::new()),
        Algorithm::Exact => solve_exact_capped(instance, enumeration_cap),
    }
}
