//! Parameter sweeps over budget fraction and threshold, with per-length
//! cohorts, and comparison tables against the SimG baseline.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::{generate_scenario, GenError, Preset};
use crate::io::{self, FormatError};
use crate::model::{build_instance, ModelError, ProblemInstance, Trajectory};
use crate::solvers::{solve, Algorithm, SolveError, DEFAULT_ENUMERATION_CAP};

pub const DEFAULT_TAU_KBPS: f64 = 750.0;

pub const SWEEP_HEADER: &str =
    "algorithm,k_prime,gamma,cohort,satisfied_count,satisfied_fraction,elapsed_ms,seed,status";

pub const COMPARISON_HEADER: &str =
    "algorithm,k_prime,gamma,cohort,baseline,baseline_count,candidate_count,ratio,flag";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid sweep spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Generate(#[from] GenError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("results do not line up: {0}")]
    Mismatch(String),
}

/// Where a sweep gets its trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
pub enum SweepSource {
    /// A trace file; relative paths resolve against the spec's directory.
    Trace { path: PathBuf },
    /// A shipped generator preset, optionally scaled down.
    Preset {
        name: String,
        seed: u64,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_tau() -> f64 {
    DEFAULT_TAU_KBPS
}

fn default_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP
}

fn default_repetitions() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub source: SweepSource,
    pub algorithms: Vec<Algorithm>,
    pub k_prime: Vec<f64>,
    pub gamma: Vec<f64>,
    #[serde(default = "default_tau")]
    pub tau_kbps: f64,
    /// Inclusive trajectory-length bands, e.g. `[[1, 5], [6, 10]]`.
    #[serde(default)]
    pub cohorts: Vec<[usize; 2]>,
    /// Solve each cohort on its own instead of slicing the full solution.
    #[serde(default)]
    pub optimize_per_cohort: bool,
    #[serde(default = "default_cap")]
    pub exact_cap: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Recorded in every row; presets carry their own seed.
    #[serde(default)]
    pub seed: u64,
}

impl SweepSpec {
    /// Spec over an in-memory instance, defaults elsewhere.
    pub fn new(algorithms: Vec<Algorithm>, k_prime: Vec<f64>, gamma: Vec<f64>) -> Self {
        Self {
            source: SweepSource::Trace { path: PathBuf::new() },
            algorithms,
            k_prime,
            gamma,
            tau_kbps: DEFAULT_TAU_KBPS,
            cohorts: Vec::new(),
            optimize_per_cohort: false,
            exact_cap: DEFAULT_ENUMERATION_CAP,
            repetitions: default_repetitions(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::Invalid(m));
        if self.algorithms.is_empty() {
            return bad("algorithms must not be empty".into());
        }
        if self.k_prime.is_empty() {
            return bad("k_prime grid must not be empty".into());
        }
        if self.gamma.is_empty() {
            return bad("gamma grid must not be empty".into());
        }
        for &k in &self.k_prime {
            if !(k > 0.0 && k <= 1.0) {
                return bad(format!("k_prime {k} outside (0, 1]"));
            }
        }
        for &g in &self.gamma {
            if !(0.0..=1.0).contains(&g) {
                return bad(format!("gamma {g} outside [0, 1]"));
            }
        }
        if !(self.tau_kbps.is_finite() && self.tau_kbps >= 0.0) {
            return bad(format!("tau_kbps {} must be non-negative", self.tau_kbps));
        }
        for &[lo, hi] in &self.cohorts {
            if lo == 0 || lo > hi {
                return bad(format!("cohort [{lo}, {hi}] is not a valid length band"));
            }
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if let SweepSource::Preset { name, scale, .. } = &self.source {
            name.parse::<Preset>().map_err(EvalError::Invalid)?;
            if !(scale.is_finite() && *scale > 0.0) {
                return bad(format!("preset scale {scale} must be positive"));
            }
        }
        Ok(())
    }

    /// Loads the trajectories named by `source`.
    pub fn load(&self, base_dir: &Path) -> Result<Vec<Trajectory>, EvalError> {
        match &self.source {
            SweepSource::Trace { path } => {
                let path = base_dir.join(path);
                let file = std::fs::File::open(&path).map_err(FormatError::Io)?;
                Ok(io::read_trace(std::io::BufReader::new(file), None)?.trajectories)
            }
            SweepSource::Preset { name, seed, scale } => {
                let preset: Preset = name.parse().map_err(EvalError::Invalid)?;
                let config = preset.config(*seed).scaled(*scale);
                Ok(generate_scenario(&config)?.trajectories)
            }
        }
    }

    /// Seed reported in the rows.
    pub fn row_seed(&self) -> u64 {
        match &self.source {
            SweepSource::Preset { seed, .. } => *seed,
            SweepSource::Trace { .. } => self.seed,
        }
    }
}

pub fn parse_sweep_spec(text: &str) -> Result<SweepSpec, EvalError> {
    let spec: SweepSpec = toml::from_str(text).map_err(|e| FormatError::Toml(io::toml_message(&e)))?;
    spec.validate()?;
    Ok(spec)
}

/// Trajectory-length band a row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cohort {
    All,
    Lengths(usize, usize),
}

impl Cohort {
    pub fn contains(self, length: usize) -> bool {
        match self {
            Cohort::All => true,
            Cohort::Lengths(lo, hi) => (lo..=hi).contains(&length),
        }
    }
}

impl fmt::Display for Cohort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cohort::All => f.write_str("all"),
            Cohort::Lengths(lo, hi) => write!(f, "{lo}-{hi}"),
        }
    }
}

impl std::str::FromStr for Cohort {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            return Ok(Cohort::All);
        }
        let (lo, hi) = s.split_once('-').ok_or_else(|| format!("bad cohort `{s}`"))?;
        let lo = lo.parse().map_err(|_| format!("bad cohort `{s}`"))?;
        let hi = hi.parse().map_err(|_| format!("bad cohort `{s}`"))?;
        Ok(Cohort::Lengths(lo, hi))
    }
}

impl Serialize for Cohort {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Cohort {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One cell of a sweep. Skipped cells leave count and fraction empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub k_prime: f64,
    pub gamma: f64,
    pub cohort: Cohort,
    pub satisfied_count: Option<usize>,
    pub satisfied_fraction: Option<f64>,
    pub elapsed_ms: f64,
    pub seed: u64,
    pub status: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// `max(1, round(k_prime * n))`, capped at `n`.
pub fn budget_for(k_prime: f64, n: usize) -> usize {
    ((k_prime * n as f64).round() as usize).max(1).min(n)
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

struct CellOutcome {
    satisfied: Vec<bool>,
    elapsed: Duration,
}

fn run_cell(
    instance: &ProblemInstance,
    algorithm: Algorithm,
    repetitions: usize,
    cap: u64,
) -> Result<Result<CellOutcome, String>, EvalError> {
    let mut times = Vec::with_capacity(repetitions);
    let mut satisfied = Vec::new();
    for _ in 0..repetitions {
        match solve(instance, algorithm, cap) {
            Ok(report) => {
                times.push(report.elapsed);
                satisfied = report
                    .solution
                    .per_trajectory_utility
                    .iter()
                    .map(|&w| crate::model::meets_threshold(w, instance.gamma()))
                    .collect();
            }
            Err(SolveError::EnumerationCap { subsets, cap }) => {
                return Ok(Err(format!("skipped: exact needs {subsets} subsets, cap is {cap}")));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Ok(CellOutcome {
        satisfied,
        elapsed: median(times),
    }))
}

/// Runs every (algorithm, k′, γ, cohort) cell in that nesting order over
/// `trajectories`. Cohort `all` always comes first.
pub fn run_sweep(spec: &SweepSpec, trajectories: &[Trajectory]) -> Result<SweepResult, EvalError> {
    spec.validate()?;
    let base = build_instance(trajectories, spec.tau_kbps, 1.0, 0)?;
    let n = base.n();
    let lengths: Vec<usize> = (0..base.m()).map(|j| base.length(j)).collect();
    let mut cohorts = vec![Cohort::All];
    cohorts.extend(spec.cohorts.iter().map(|&[lo, hi]| Cohort::Lengths(lo, hi)));
    let seed = spec.row_seed();

    // per-cohort sub-instances for the optimize-per-cohort mode
    let mut cohort_instances: HashMap<Cohort, Option<ProblemInstance>> = HashMap::new();
    if spec.optimize_per_cohort {
        for &c in &cohorts[1..] {
            let keep: Vec<Trajectory> = trajectories
                .iter()
                .zip(&lengths)
                .filter(|(_, &l)| c.contains(l))
                .map(|(t, _)| t.clone())
                .collect();
            let inst = if keep.is_empty() {
                None
            } else {
                Some(build_instance(&keep, spec.tau_kbps, 1.0, 0)?)
            };
            cohort_instances.insert(c, inst);
        }
    }

    let mut rows = Vec::new();
    for &algorithm in &spec.algorithms {
        for &k_prime in &spec.k_prime {
            let k = budget_for(k_prime, n);
            for &gamma in &spec.gamma {
                let instance = base.with_params(gamma, k)?;
                let full = run_cell(&instance, algorithm, spec.repetitions, spec.exact_cap)?;
                for &cohort in &cohorts {
                    let row = |count: Option<usize>, fraction: Option<f64>, elapsed: Duration, status: String| SweepRow {
                        algorithm,
                        k_prime,
                        gamma,
                        cohort,
                        satisfied_count: count,
                        satisfied_fraction: fraction,
                        elapsed_ms: elapsed.as_secs_f64() * 1000.0,
                        seed,
                        status,
                    };
                    let own = match cohort_instances.get(&cohort) {
                        Some(Some(sub)) if cohort != Cohort::All => {
                            let sub = sub.with_params(gamma, k.min(sub.n()))?;
                            Some(run_cell(&sub, algorithm, spec.repetitions, spec.exact_cap)?)
                        }
                        Some(None) => {
                            rows.push(row(Some(0), Some(0.0), Duration::ZERO, "ok".into()));
                            continue;
                        }
                        _ => None,
                    };
                    let outcome = own.as_ref().unwrap_or(&full);
                    match outcome {
                        Ok(cell) => {
                            let members: Vec<bool> = if own.is_some() {
                                vec![true; cell.satisfied.len()]
                            } else {
                                lengths.iter().map(|&l| cohort.contains(l)).collect()
                            };
                            let size = members.iter().filter(|&&b| b).count();
                            let count = cell
                                .satisfied
                                .iter()
                                .zip(&members)
                                .filter(|(&s, &m)| s && m)
                                .count();
                            let fraction = if size == 0 { 0.0 } else { count as f64 / size as f64 };
                            rows.push(row(Some(count), Some(fraction), cell.elapsed, "ok".into()));
                        }
                        Err(reason) => rows.push(row(None, None, Duration::ZERO, reason.clone())),
                    }
                }
            }
        }
    }
    Ok(SweepResult { rows })
}

pub fn write_sweep_csv<W: std::io::Write>(out: W, result: &SweepResult) -> Result<(), EvalError> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    for row in &result.rows {
        w.serialize(row)?;
    }
    if result.rows.is_empty() {
        w.write_record(SWEEP_HEADER.split(','))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_sweep_csv<R: std::io::Read>(input: R) -> Result<SweepResult, EvalError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != SWEEP_HEADER {
        return Err(EvalError::Mismatch(format!(
            "expected header `{SWEEP_HEADER}`, found `{}`",
            header.join(",")
        )));
    }
    let rows = r.deserialize().collect::<Result<Vec<SweepRow>, _>>()?;
    Ok(SweepResult { rows })
}

pub fn sweep_to_string(result: &SweepResult) -> String {
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, result).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

/// A candidate cell measured against a baseline cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub algorithm: Algorithm,
    pub k_prime: f64,
    pub gamma: f64,
    pub cohort: Cohort,
    pub baseline: Algorithm,
    pub baseline_count: usize,
    pub candidate_count: usize,
    /// `candidate / baseline`; 1 when both are 0, infinite when only the
    /// baseline is 0.
    pub ratio: f64,
    /// `underperforms` when the candidate falls short of the baseline.
    pub flag: String,
}

pub fn ratio(candidate: usize, baseline: usize) -> f64 {
    match (candidate, baseline) {
        (0, 0) => 1.0,
        (_, 0) => f64::INFINITY,
        (c, b) => c as f64 / b as f64,
    }
}

type CellKey = (u64, u64, Cohort);

fn key(row: &SweepRow) -> CellKey {
    (row.k_prime.to_bits(), row.gamma.to_bits(), row.cohort)
}

fn compare_row(candidate: &SweepRow, baseline: &SweepRow) -> Option<ComparisonRow> {
    let (c, b) = (candidate.satisfied_count?, baseline.satisfied_count?);
    let r = ratio(c, b);
    Some(ComparisonRow {
        algorithm: candidate.algorithm,
        k_prime: candidate.k_prime,
        gamma: candidate.gamma,
        cohort: candidate.cohort,
        baseline: baseline.algorithm,
        baseline_count: b,
        candidate_count: c,
        ratio: r,
        flag: if r < 1.0 { "underperforms".into() } else { String::new() },
    })
}

/// Ratios of every non-SimG algorithm against SimG on the same cell.
/// Skipped cells are left out. Every algorithm must cover exactly SimG's
/// cells.
pub fn compare_report(result: &SweepResult) -> Result<Vec<ComparisonRow>, EvalError> {
    let baseline: HashMap<CellKey, &SweepRow> = result
        .rows
        .iter()
        .filter(|r| r.algorithm == Algorithm::SimG)
        .map(|r| (key(r), r))
        .collect();
    if baseline.is_empty() {
        return Err(EvalError::Mismatch("no SimG rows to compare against".into()));
    }
    let algorithms: BTreeSet<Algorithm> = result
        .rows
        .iter()
        .map(|r| r.algorithm)
        .filter(|&a| a != Algorithm::SimG)
        .collect();
    if algorithms.is_empty() {
        return Err(EvalError::Mismatch("need at least one algorithm besides SimG".into()));
    }
    for &a in &algorithms {
        let cells: BTreeSet<CellKey> = result.rows.iter().filter(|r| r.algorithm == a).map(key).collect();
        let base_cells: BTreeSet<CellKey> = baseline.keys().copied().collect();
        if cells != base_cells {
            return Err(EvalError::Mismatch(format!("{a} and simg cover different grid cells")));
        }
    }
    Ok(result
        .rows
        .iter()
        .filter(|r| r.algorithm != Algorithm::SimG)
        .filter_map(|r| compare_row(r, baseline[&key(r)]))
        .collect())
}

/// Cell-by-cell ratios of `candidate` against `baseline`; both must have
/// the same cells in the same order.
pub fn compare_results(baseline: &SweepResult, candidate: &SweepResult) -> Result<Vec<ComparisonRow>, EvalError> {
    if baseline.rows.len() != candidate.rows.len() {
        return Err(EvalError::Mismatch(format!(
            "{} rows against {} rows",
            baseline.rows.len(),
            candidate.rows.len()
        )));
    }
    let mut out = Vec::new();
    for (i, (b, c)) in baseline.rows.iter().zip(&candidate.rows).enumerate() {
        if key(b) != key(c) || b.algorithm != c.algorithm {
            return Err(EvalError::Mismatch(format!("row {} refers to different cells", i + 1)));
        }
        out.extend(compare_row(c, b));
    }
    Ok(out)
}

pub fn comparison_to_string(rows: &[ComparisonRow]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("writing to memory");
    }
    if rows.is_empty() {
        w.write_record(COMPARISON_HEADER.split(',')).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}
