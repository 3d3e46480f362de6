//! File formats: line-delimited JSON traces and station sidecars, the
//! scenario manifest, and TOML configs.
//!
//! Station ids are opaque strings in files. A [`StationRegistry`] maps them
//! to dense [`StationId`]s in natural-sort order, so `B2` comes before `B10`
//! and the numeric ordering used by solver tie-breaks survives the mapping.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::generator::{GeneratedScenario, GeneratedStation, ScenarioConfig, Technology, Topology};
use crate::model::{StationId, Trajectory, VisitRecord};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate trajectory id {id}")]
    DuplicateTrajectory { line: usize, id: u64 },
    #[error("line {line}: duplicate station `{bs}`")]
    DuplicateStation { line: usize, bs: String },
    #[error("station `{0}` is not in the registry")]
    UnknownStation(String),
    #[error("station id {0} has no name")]
    UnnamedStation(u32),
    #[error("{0}")]
    Toml(String),
    #[error("{0}")]
    Json(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Compares two strings treating runs of ASCII digits as numbers.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut x, mut y) = (a.as_bytes(), b.as_bytes());
    loop {
        match (x.first(), y.first()) {
            (None, None) => return a.cmp(b),
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(p), Some(q)) if p.is_ascii_digit() && q.is_ascii_digit() => {
                let nx = x.iter().take_while(|c| c.is_ascii_digit()).count();
                let ny = y.iter().take_while(|c| c.is_ascii_digit()).count();
                let dx = trim_zeros(&x[..nx]);
                let dy = trim_zeros(&y[..ny]);
                let ord = dx.len().cmp(&dy.len()).then_with(|| dx.cmp(dy));
                if ord != Ordering::Equal {
                    return ord;
                }
                x = &x[nx..];
                y = &y[ny..];
            }
            (Some(p), Some(q)) => {
                if p != q {
                    return p.cmp(q);
                }
                x = &x[1..];
                y = &y[1..];
            }
        }
    }
}

fn trim_zeros(d: &[u8]) -> &[u8] {
    let lead = d.iter().take_while(|&&c| c == b'0').count();
    &d[lead.min(d.len().saturating_sub(1))..]
}

/// Bidirectional map between station names and dense ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StationRegistry {
    names: Vec<String>,
    index: HashMap<String, StationId>,
}

impl StationRegistry {
    /// Registry over the distinct `names`, ids assigned in natural order.
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: Vec<String> = names.into_iter().map(Into::into).collect();
        names.sort_by(|a, b| natural_cmp(a, b));
        names.dedup();
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), StationId(i as u32)))
            .collect();
        Self { names, index }
    }

    /// Registry in which `names[i]` is `StationId(i)`, as written.
    pub fn from_ordered(names: Vec<String>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), StationId(i as u32)))
            .collect();
        Self { names, index }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<StationId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: StationId) -> Option<&str> {
        self.names.get(id.0 as usize).map(String::as_str)
    }

    /// Names in id order.
    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Name used for generated station `id`.
pub fn generated_name(id: StationId) -> String {
    format!("B{}", id.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceVisit {
    pub bs: String,
    pub duration_ms: u64,
    pub throughput_kbps: f64,
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub id: u64,
    pub visits: Vec<TraceVisit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub departure_s: Option<u32>,
}

/// Parses a single trace line.
pub fn parse_trace_line(line: &str) -> Result<TraceRecord, serde_json::Error> {
    serde_json::from_str(line)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub trajectories: Vec<Trajectory>,
    pub departures_s: Vec<Option<u32>>,
    pub registry: StationRegistry,
}

/// Reads a trace line by line; blank lines are skipped. Station names are
/// mapped through `registry` when given (unknown names are an error),
/// otherwise a registry is built from the names seen.
pub fn read_trace<R: BufRead>(reader: R, registry: Option<&StationRegistry>) -> Result<Trace, FormatError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_trace_line(&line).map_err(|e| FormatError::Syntax {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(record.id) {
            return Err(FormatError::DuplicateTrajectory { line: i + 1, id: record.id });
        }
        records.push(record);
    }
    let registry = match registry {
        Some(r) => r.clone(),
        None => StationRegistry::from_names(records.iter().flat_map(|r| r.visits.iter().map(|v| v.bs.clone()))),
    };
    let mut trajectories = Vec::with_capacity(records.len());
    let mut departures_s = Vec::with_capacity(records.len());
    for r in records {
        let visits = r
            .visits
            .iter()
            .map(|v| {
                registry
                    .id(&v.bs)
                    .map(|id| VisitRecord::new(id, v.duration_ms, v.throughput_kbps))
                    .ok_or_else(|| FormatError::UnknownStation(v.bs.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        trajectories.push(Trajectory::new(r.id, visits));
        departures_s.push(r.departure_s);
    }
    Ok(Trace {
        trajectories,
        departures_s,
        registry,
    })
}

/// Writes one line per trajectory.
pub fn write_trace<W: Write>(
    mut out: W,
    trajectories: &[Trajectory],
    departures_s: Option<&[u32]>,
    registry: &StationRegistry,
) -> Result<(), FormatError> {
    for (j, t) in trajectories.iter().enumerate() {
        let visits = t
            .visits
            .iter()
            .map(|v| {
                Ok(TraceVisit {
                    bs: registry.name(v.station).ok_or(FormatError::UnnamedStation(v.station.0))?.to_string(),
                    duration_ms: v.duration_ms,
                    throughput_kbps: v.throughput_kbps,
                })
            })
            .collect::<Result<Vec<_>, FormatError>>()?;
        let record = TraceRecord {
            id: t.id.0,
            visits,
            departure_s: departures_s.map(|d| d[j]),
        };
        serde_json::to_writer(&mut out, &record).map_err(|e| FormatError::Json(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// One line of a station sidecar file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationRecord {
    pub bs: String,
    pub x_km: f64,
    pub y_km: f64,
    pub technology: Technology,
    pub congested: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub throughput_kbps: Option<f64>,
}

pub fn parse_station_line(line: &str) -> Result<StationRecord, serde_json::Error> {
    serde_json::from_str(line)
}

pub fn read_stations<R: BufRead>(reader: R) -> Result<Vec<StationRecord>, FormatError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_station_line(&line).map_err(|e| FormatError::Syntax {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(record.bs.clone()) {
            return Err(FormatError::DuplicateStation { line: i + 1, bs: record.bs });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn write_stations<W: Write>(mut out: W, stations: &[GeneratedStation]) -> Result<(), FormatError> {
    for s in stations {
        let record = StationRecord {
            bs: generated_name(s.id),
            x_km: s.position.x_km,
            y_km: s.position.y_km,
            technology: s.technology,
            congested: s.congested,
            throughput_kbps: Some(s.per_user_throughput_kbps),
        };
        serde_json::to_writer(&mut out, &record).map_err(|e| FormatError::Json(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Provenance record written next to a generated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    /// SHA-256 of the config's canonical JSON form.
    pub config_hash: String,
    pub seed: u64,
    pub topology: Topology,
    pub num_trajectories: usize,
    pub num_stations: usize,
    /// Station names in dense-id order.
    pub station_ids: Vec<String>,
    pub config: ScenarioConfig,
}

/// Canonical JSON of a config: keys sorted at every level, no whitespace.
pub fn canonical_json(config: &ScenarioConfig) -> String {
    let value = serde_json::to_value(config).expect("config serializes");
    sort_keys(value).to_string()
}

fn sort_keys(v: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Object(map) => {
            let sorted: BTreeMap<String, Value> = map.into_iter().map(|(k, v)| (k, sort_keys(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

pub fn config_hash(config: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(canonical_json(config).as_bytes()))
}

pub fn manifest_for(config: &ScenarioConfig, scenario: &GeneratedScenario) -> Manifest {
    Manifest {
        tool_version: TOOL_VERSION.to_string(),
        config_hash: config_hash(config),
        seed: config.seed,
        topology: config.topology,
        num_trajectories: scenario.trajectories.len(),
        num_stations: scenario.stations.len(),
        station_ids: scenario.stations.iter().map(|s| generated_name(s.id)).collect(),
        config: config.clone(),
    }
}

pub fn manifest_to_string(manifest: &Manifest) -> String {
    let mut s = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    s.push('\n');
    s
}

pub fn parse_manifest(text: &str) -> Result<Manifest, FormatError> {
    serde_json::from_str(text).map_err(|e| FormatError::Json(e.to_string()))
}

/// Registry of a generated scenario: `B{i}` is `StationId(i)`.
pub fn generated_registry(stations: &[GeneratedStation]) -> StationRegistry {
    StationRegistry::from_ordered(stations.iter().map(|s| generated_name(s.id)).collect())
}

/// The three files of a generated scenario, as text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioFiles {
    pub trace: String,
    pub stations: String,
    pub manifest: String,
}

pub fn render_scenario(config: &ScenarioConfig, scenario: &GeneratedScenario) -> Result<ScenarioFiles, FormatError> {
    let registry = generated_registry(&scenario.stations);
    let mut trace = Vec::new();
    write_trace(&mut trace, &scenario.trajectories, Some(&scenario.departures_s), &registry)?;
    let mut stations = Vec::new();
    write_stations(&mut stations, &scenario.stations)?;
    Ok(ScenarioFiles {
        trace: String::from_utf8(trace).expect("json is utf-8"),
        stations: String::from_utf8(stations).expect("json is utf-8"),
        manifest: manifest_to_string(&manifest_for(config, scenario)),
    })
}

/// Parses a scenario config from TOML. Errors name the offending key.
pub fn parse_scenario_config(text: &str) -> Result<ScenarioConfig, FormatError> {
    toml::from_str(text).map_err(|e| FormatError::Toml(toml_message(&e)))
}

pub fn scenario_config_to_toml(config: &ScenarioConfig) -> String {
    toml::to_string(config).expect("config serializes to toml")
}

pub(crate) fn toml_message(e: &toml::de::Error) -> String {
    e.message().trim().to_string()
}

/// Upgraded station names, one per line, in natural order.
pub fn render_station_list(ids: impl IntoIterator<Item = StationId>, registry: &StationRegistry) -> Result<String, FormatError> {
    let mut names = ids
        .into_iter()
        .map(|id| registry.name(id).map(str::to_string).ok_or(FormatError::UnnamedStation(id.0)))
        .collect::<Result<Vec<_>, _>>()?;
    names.sort_by(|a, b| natural_cmp(a, b));
    let mut out = String::new();
    for n in names {
        out.push_str(&n);
        out.push('\n');
    }
    Ok(out)
}
