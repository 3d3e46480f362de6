//! Synthetic city, network and commute-trajectory generator.
//!
//! A city is a stack of concentric rectangles (CBD innermost). Homes and
//! offices are scattered inside each layer in proportion to
//! `density * area`; stations are placed in proportion to the local
//! home/office count. Each trajectory is a home-to-office drive along a
//! uniform road grid, handed off to the nearest station at every point.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{StationId, Trajectory, VisitRecord};
use crate::rng::{Phase, ScenarioRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("layer {0} has zero area")]
    DegenerateLayer(LayerName),
    #[error("no stations were produced")]
    ZeroStations,
    #[error("nothing to place: home and office lists must be non-empty")]
    NoPoints,
    #[error("trajectory length {length} exceeds the {stations} available stations")]
    LengthExceedsStations { length: usize, stations: usize },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> GenError {
    GenError::InvalidField {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerName {
    CBD,
    SD,
    UE,
    EC,
}

impl fmt::Display for LayerName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LayerName::CBD => "CBD",
            LayerName::SD => "SD",
            LayerName::UE => "UE",
            LayerName::EC => "EC",
        };
        f.write_str(s)
    }
}

/// One concentric layer. `area_fraction` is this layer's share of the city
/// area (the ring between it and the next inner layer); shares sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub name: LayerName,
    pub area_fraction: f64,
    pub home_density: f64,
    pub office_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CityConfig {
    pub seed: u64,
    pub width_km: f64,
    pub height_km: f64,
    /// Inner to outer.
    pub layers: Vec<LayerConfig>,
    pub num_homes: usize,
    pub num_offices: usize,
    pub grid_spacing_km: f64,
    pub road_speed_kmph: f64,
    #[serde(default = "default_commute_start")]
    pub commute_start_h: f64,
    #[serde(default = "default_commute_end")]
    pub commute_end_h: f64,
    /// Spacing of nearest-station probes along a route; switch points between
    /// probes are solved exactly.
    #[serde(default = "default_handoff_step")]
    pub handoff_step_km: f64,
}

fn default_commute_start() -> f64 {
    7.0
}

fn default_commute_end() -> f64 {
    11.0
}

fn default_handoff_step() -> f64 {
    0.05
}

/// Per-user throughput ranges in kbps, `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThroughputRanges {
    pub congested_2g: [f64; 2],
    pub clear_2g: [f64; 2],
    pub congested_3g: [f64; 2],
    pub clear_3g: [f64; 2],
}

impl Default for ThroughputRanges {
    fn default() -> Self {
        Self {
            congested_2g: [20.0, 80.0],
            clear_2g: [50.0, 150.0],
            congested_3g: [20.0, 400.0],
            clear_3g: [300.0, 2000.0],
        }
    }
}

impl ThroughputRanges {
    pub fn range_for(&self, technology: Technology, congested: bool) -> [f64; 2] {
        match (technology, congested) {
            (Technology::G2, true) => self.congested_2g,
            (Technology::G2, false) => self.clear_2g,
            (Technology::G3, true) => self.congested_3g,
            (Technology::G3, false) => self.clear_3g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub seed: u64,
    #[serde(default = "default_frac_2g")]
    pub frac_2g: f64,
    #[serde(default = "default_frac_congested")]
    pub frac_congested: f64,
    #[serde(default)]
    pub ranges: ThroughputRanges,
    /// Stations per home or office; ignored when `num_stations` is set.
    #[serde(default = "default_density_scale")]
    pub station_density_scale: f64,
    #[serde(default)]
    pub num_stations: Option<usize>,
    /// Side of the square cells stations are apportioned over.
    #[serde(default = "default_cell_size")]
    pub cell_size_km: f64,
}

fn default_frac_2g() -> f64 {
    0.82
}

fn default_frac_congested() -> f64 {
    0.20
}

fn default_density_scale() -> f64 {
    0.1
}

fn default_cell_size() -> f64 {
    1.0
}

impl NetworkConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            frac_2g: default_frac_2g(),
            frac_congested: default_frac_congested(),
            ranges: ThroughputRanges::default(),
            station_density_scale: default_density_scale(),
            num_stations: None,
            cell_size_km: default_cell_size(),
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        for (name, v) in [("network.frac_2g", self.frac_2g), ("network.frac_congested", self.frac_congested)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, format!("{v} is outside [0, 1]")));
            }
        }
        let r = &self.ranges;
        for (name, [lo, hi]) in [
            ("network.ranges.congested_2g", r.congested_2g),
            ("network.ranges.clear_2g", r.clear_2g),
            ("network.ranges.congested_3g", r.congested_3g),
            ("network.ranges.clear_3g", r.clear_3g),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                return Err(invalid(name, format!("[{lo}, {hi}] is not a valid range")));
            }
        }
        if !(self.station_density_scale.is_finite() && self.station_density_scale >= 0.0) {
            return Err(invalid("network.station_density_scale", "must be non-negative"));
        }
        if !(self.cell_size_km.is_finite() && self.cell_size_km > 0.0) {
            return Err(invalid("network.cell_size_km", "must be positive"));
        }
        if self.num_stations == Some(0) {
            return Err(invalid("network.num_stations", "must be positive"));
        }
        Ok(())
    }
}

fn positive(field: &str, v: f64) -> Result<(), GenError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("{v} must be positive")))
    }
}

impl CityConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        positive("city.width_km", self.width_km)?;
        positive("city.height_km", self.height_km)?;
        positive("city.grid_spacing_km", self.grid_spacing_km)?;
        positive("city.road_speed_kmph", self.road_speed_kmph)?;
        positive("city.handoff_step_km", self.handoff_step_km)?;
        if self.num_homes == 0 {
            return Err(invalid("city.num_homes", "must be positive"));
        }
        if self.num_offices == 0 {
            return Err(invalid("city.num_offices", "must be positive"));
        }
        if !(0.0..=24.0).contains(&self.commute_start_h)
            || !(0.0..=24.0).contains(&self.commute_end_h)
            || self.commute_start_h > self.commute_end_h
        {
            return Err(invalid("city.commute_start_h", "commute window must lie within 0..24 h and start before it ends"));
        }
        if self.layers.is_empty() {
            return Err(invalid("city.layers", "at least one layer is required"));
        }
        let mut sum = 0.0;
        for (i, l) in self.layers.iter().enumerate() {
            if l.area_fraction.is_nan() || l.area_fraction <= 0.0 {
                return Err(GenError::DegenerateLayer(l.name));
            }
            if !(l.home_density.is_finite() && l.home_density >= 0.0) {
                return Err(invalid(format!("city.layers[{i}].home_density"), "must be non-negative"));
            }
            if !(l.office_density.is_finite() && l.office_density >= 0.0) {
                return Err(invalid(format!("city.layers[{i}].office_density"), "must be non-negative"));
            }
            sum += l.area_fraction;
        }
        if (sum - 1.0).abs() > 1e-6 {
            return Err(invalid("city.layers", format!("area fractions sum to {sum}, expected 1")));
        }
        if !self.layers.iter().any(|l| l.home_density > 0.0) {
            return Err(invalid("city.layers", "no layer has a positive home density"));
        }
        if !self.layers.iter().any(|l| l.office_density > 0.0) {
            return Err(invalid("city.layers", "no layer has a positive office density"));
        }
        Ok(())
    }

    /// Outer rectangle of layer `i` as `[x0, y0, x1, y1]`, centred.
    pub fn layer_rect(&self, i: usize) -> [f64; 4] {
        let cumulative: f64 = self.layers[..=i].iter().map(|l| l.area_fraction).sum();
        let scale = cumulative.min(1.0).sqrt();
        let (w, h) = (self.width_km * scale, self.height_km * scale);
        let (cx, cy) = (self.width_km / 2.0, self.height_km / 2.0);
        [cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x_km: f64,
    pub y_km: f64,
}

impl Point {
    pub fn new(x_km: f64, y_km: f64) -> Self {
        Self { x_km, y_km }
    }

    fn dist2(self, o: Point) -> f64 {
        let (dx, dy) = (self.x_km - o.x_km, self.y_km - o.y_km);
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Technology {
    #[serde(rename = "2G")]
    G2,
    #[serde(rename = "3G")]
    G3,
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Technology::G2 => "2G",
            Technology::G3 => "3G",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedStation {
    pub id: StationId,
    pub position: Point,
    pub technology: Technology,
    pub congested: bool,
    pub per_user_throughput_kbps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    City,
    Star,
    Mesh,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::City => "city",
            Topology::Star => "star",
            Topology::Mesh => "mesh",
        })
    }
}

impl FromStr for Topology {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "city" => Ok(Topology::City),
            "star" => Ok(Topology::Star),
            "mesh" => Ok(Topology::Mesh),
            other => Err(format!("unknown topology `{other}` (expected city, star or mesh)")),
        }
    }
}

/// Everything needed to regenerate a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topology: Topology,
    /// Seed of the trajectory phase (city and network carry their own).
    pub seed: u64,
    pub num_trajectories: usize,
    pub city: CityConfig,
    pub network: NetworkConfig,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.num_trajectories == 0 {
            return Err(invalid("num_trajectories", "must be positive"));
        }
        self.city.validate()?;
        self.network.validate()
    }

    /// Sets the trajectory, city and network seeds together.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.city.seed = seed;
        self.network.seed = seed;
        self
    }

    /// Scales trajectory, home, office and station counts by `factor`
    /// (each at least 1); city geometry is unchanged.
    pub fn scaled(mut self, factor: f64) -> Self {
        let s = |v: usize| ((v as f64 * factor).round() as usize).max(1);
        self.num_trajectories = s(self.num_trajectories);
        self.city.num_homes = s(self.city.num_homes);
        self.city.num_offices = s(self.city.num_offices);
        self.network.num_stations = self.network.num_stations.map(s);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub topology: Topology,
    pub seed: u64,
    pub num_trajectories: usize,
    pub city: CityConfig,
    pub network: NetworkConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScenario {
    pub stations: Vec<GeneratedStation>,
    pub trajectories: Vec<Trajectory>,
    /// Departure time of each trajectory, seconds after midnight. Metadata
    /// only; it plays no part in utilities.
    pub departures_s: Vec<u32>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct City {
    pub homes: Vec<Point>,
    pub offices: Vec<Point>,
}

/// Largest-remainder apportionment of `total` over `weights` (ties go to the
/// lower index).
pub(crate) fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Uniform point in the ring between `outer` and `inner` (or the whole
/// `outer` rectangle when there is no inner one).
fn sample_ring(rng: &mut ScenarioRng, outer: [f64; 4], inner: Option<[f64; 4]>) -> Point {
    let [ox0, oy0, ox1, oy1] = outer;
    let strips: Vec<[f64; 4]> = match inner {
        None => vec![outer],
        Some([ix0, iy0, ix1, iy1]) => vec![
            [ox0, iy1, ox1, oy1],
            [ox0, oy0, ox1, iy0],
            [ox0, iy0, ix0, iy1],
            [ix1, iy0, ox1, iy1],
        ],
    };
    let areas: Vec<f64> = strips
        .iter()
        .map(|r| ((r[2] - r[0]) * (r[3] - r[1])).max(0.0))
        .collect();
    let total: f64 = areas.iter().sum();
    let mut pick = rng.unit() * total;
    let mut rect = strips[strips.len() - 1];
    for (r, a) in strips.iter().zip(&areas) {
        if pick < *a {
            rect = *r;
            break;
        }
        pick -= a;
    }
    Point::new(rng.range(rect[0], rect[2]), rng.range(rect[1], rect[3]))
}

/// Scatters homes and offices over the layers.
pub fn generate_city(config: &CityConfig) -> Result<City, GenError> {
    config.validate()?;
    let areas: Vec<f64> = config
        .layers
        .iter()
        .map(|l| l.area_fraction * config.width_km * config.height_km)
        .collect();
    let home_w: Vec<f64> = config.layers.iter().zip(&areas).map(|(l, a)| l.home_density * a).collect();
    let office_w: Vec<f64> = config.layers.iter().zip(&areas).map(|(l, a)| l.office_density * a).collect();
    let home_counts = apportion(config.num_homes, &home_w);
    let office_counts = apportion(config.num_offices, &office_w);

    let mut rng = ScenarioRng::new(config.seed, Phase::City);
    let mut homes = Vec::with_capacity(config.num_homes);
    let mut offices = Vec::with_capacity(config.num_offices);
    for i in 0..config.layers.len() {
        let outer = config.layer_rect(i);
        let inner = (i > 0).then(|| config.layer_rect(i - 1));
        for _ in 0..home_counts[i] {
            homes.push(sample_ring(&mut rng, outer, inner));
        }
        for _ in 0..office_counts[i] {
            offices.push(sample_ring(&mut rng, outer, inner));
        }
    }
    Ok(City { homes, offices })
}

fn draw_station(rng: &mut ScenarioRng, config: &NetworkConfig, id: u32, position: Point) -> GeneratedStation {
    let technology = if rng.chance(config.frac_2g) {
        Technology::G2
    } else {
        Technology::G3
    };
    let congested = rng.chance(config.frac_congested);
    let [lo, hi] = config.ranges.range_for(technology, congested);
    GeneratedStation {
        id: StationId(id),
        position,
        technology,
        congested,
        per_user_throughput_kbps: rng.range(lo, hi),
    }
}

/// Deploys stations over square cells in proportion to the number of homes
/// and offices in each cell.
pub fn generate_network(
    config: &NetworkConfig,
    homes: &[Point],
    offices: &[Point],
) -> Result<Vec<GeneratedStation>, GenError> {
    config.validate()?;
    if homes.is_empty() && offices.is_empty() {
        return Err(GenError::NoPoints);
    }
    let cell = config.cell_size_km;
    let mut counts: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for p in homes.iter().chain(offices) {
        let key = ((p.x_km / cell).floor() as i64, (p.y_km / cell).floor() as i64);
        *counts.entry(key).or_default() += 1;
    }
    let total = config.num_stations.unwrap_or_else(|| {
        (config.station_density_scale * (homes.len() + offices.len()) as f64).round() as usize
    });
    if total == 0 {
        return Err(GenError::ZeroStations);
    }
    let keys: Vec<(i64, i64)> = counts.keys().copied().collect();
    let weights: Vec<f64> = counts.values().map(|&c| c as f64).collect();
    let per_cell = apportion(total, &weights);

    let mut rng = ScenarioRng::new(config.seed, Phase::Network);
    let mut stations = Vec::with_capacity(total);
    for (&(cx, cy), &count) in keys.iter().zip(&per_cell) {
        for _ in 0..count {
            let x = rng.range(cx as f64 * cell, (cx + 1) as f64 * cell);
            let y = rng.range(cy as f64 * cell, (cy + 1) as f64 * cell);
            let id = stations.len() as u32;
            stations.push(draw_station(&mut rng, config, id, Point::new(x, y)));
        }
    }
    Ok(stations)
}

/// Uniform-grid bucket index for nearest-station queries. Equidistant
/// stations resolve to the lower index.
pub(crate) struct NearestIndex<'a> {
    points: &'a [Point],
    x0: f64,
    y0: f64,
    cell: f64,
    nx: i64,
    ny: i64,
    buckets: Vec<Vec<u32>>,
}

impl<'a> NearestIndex<'a> {
    pub(crate) fn new(points: &'a [Point]) -> Self {
        assert!(!points.is_empty());
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in points {
            x0 = x0.min(p.x_km);
            y0 = y0.min(p.y_km);
            x1 = x1.max(p.x_km);
            y1 = y1.max(p.y_km);
        }
        let area = ((x1 - x0) * (y1 - y0)).max(1e-6);
        let cell = (area / points.len() as f64).sqrt().max(1e-3) * 1.5;
        let nx = (((x1 - x0) / cell).floor() as i64 + 1).max(1);
        let ny = (((y1 - y0) / cell).floor() as i64 + 1).max(1);
        let mut buckets = vec![Vec::new(); (nx * ny) as usize];
        let mut index = Self { points, x0, y0, cell, nx, ny, buckets: Vec::new() };
        for (i, p) in points.iter().enumerate() {
            let (cx, cy) = index.cell_of(*p);
            buckets[(cy * nx + cx) as usize].push(i as u32);
        }
        index.buckets = buckets;
        index
    }

    fn cell_of(&self, p: Point) -> (i64, i64) {
        let cx = ((p.x_km - self.x0) / self.cell).floor() as i64;
        let cy = ((p.y_km - self.y0) / self.cell).floor() as i64;
        (cx.clamp(0, self.nx - 1), cy.clamp(0, self.ny - 1))
    }

    pub(crate) fn nearest(&self, p: Point) -> usize {
        let (cx, cy) = self.cell_of(p);
        let mut best: Option<(f64, usize)> = None;
        let max_ring = self.nx.max(self.ny);
        for r in 0..=max_ring {
            if let Some((d2, _)) = best {
                // every point in ring r is at least (r - 1) cells away
                let reach = (r - 1).max(0) as f64 * self.cell;
                if reach * reach > d2 {
                    break;
                }
            }
            for gy in (cy - r)..=(cy + r) {
                if gy < 0 || gy >= self.ny {
                    continue;
                }
                let on_edge_row = gy == cy - r || gy == cy + r;
                let mut gx = cx - r;
                while gx <= cx + r {
                    if gx >= 0 && gx < self.nx {
                        for &i in &self.buckets[(gy * self.nx + gx) as usize] {
                            let d2 = p.dist2(self.points[i as usize]);
                            let i = i as usize;
                            best = match best {
                                Some((bd, bi)) if bd < d2 || (bd == d2 && bi < i) => Some((bd, bi)),
                                _ => Some((d2, i)),
                            };
                        }
                    }
                    gx += if on_edge_row || r == 0 { 1 } else { 2 * r };
                }
            }
        }
        best.expect("index is non-empty").1
    }
}

struct Walker<'a> {
    index: &'a NearestIndex<'a>,
    points: &'a [Point],
    step_km: f64,
    /// (station, start position along the route in km)
    pieces: Vec<(usize, f64)>,
}

impl Walker<'_> {
    fn current(&self) -> Option<usize> {
        self.pieces.last().map(|p| p.0)
    }

    fn switch_to(&mut self, station: usize, at_km: f64) {
        if self.current() != Some(station) {
            self.pieces.push((station, at_km));
        }
    }

    /// Parameter along `a -> a + d` where stations `s0` and `s1` are equidistant.
    fn bisector(&self, a: Point, d: Point, s0: usize, s1: usize, t0: f64, t1: f64) -> f64 {
        let (p0, p1) = (self.points[s0], self.points[s1]);
        let denom = 2.0 * (d.x_km * (p0.x_km - p1.x_km) + d.y_km * (p0.y_km - p1.y_km));
        let t = if denom == 0.0 {
            (t0 + t1) / 2.0
        } else {
            (a.dist2(p0) - a.dist2(p1)) / denom
        };
        t.clamp(t0, t1)
    }

    #[allow(clippy::too_many_arguments)]
    fn resolve(&mut self, a: Point, d: Point, len: f64, offset: f64, t0: f64, t1: f64, s0: usize, s1: usize, depth: u32) {
        let tc = self.bisector(a, d, s0, s1, t0, t1);
        let pc = Point::new(a.x_km + tc * d.x_km, a.y_km + tc * d.y_km);
        let q = self.index.nearest(pc);
        let closer = pc.dist2(self.points[q]) < pc.dist2(self.points[s0]) - 1e-12;
        if q == s0 || q == s1 || !closer || depth > 48 {
            self.switch_to(s1, offset + tc * len);
        } else {
            self.resolve(a, d, len, offset, t0, tc, s0, q, depth + 1);
            self.resolve(a, d, len, offset, tc, t1, q, s1, depth + 1);
        }
    }

    fn walk_segment(&mut self, a: Point, b: Point, offset: f64) -> f64 {
        let d = Point::new(b.x_km - a.x_km, b.y_km - a.y_km);
        let len = a.dist2(b).sqrt();
        let start = self.index.nearest(a);
        self.switch_to(start, offset);
        if len == 0.0 {
            return 0.0;
        }
        let samples = (len / self.step_km).ceil().max(1.0) as usize;
        let mut prev_t = 0.0;
        let mut cur = start;
        for i in 1..=samples {
            let t = i as f64 / samples as f64;
            let s = self.index.nearest(Point::new(a.x_km + t * d.x_km, a.y_km + t * d.y_km));
            if s != cur {
                self.resolve(a, d, len, offset, prev_t, t, cur, s, 0);
                cur = s;
            }
            prev_t = t;
        }
        len
    }
}

/// Visit records for a drive along `path` at `speed_kmph`, associated with
/// the nearest station at every point. Visits to the same station are merged
/// (first-visit order kept). A zero-length path yields one 1 ms visit.
pub fn associate_path(
    path: &[Point],
    stations: &[GeneratedStation],
    speed_kmph: f64,
    step_km: f64,
) -> Vec<VisitRecord> {
    let points: Vec<Point> = stations.iter().map(|s| s.position).collect();
    let index = NearestIndex::new(&points);
    associate_with_index(path, stations, &points, &index, speed_kmph, step_km)
}

fn associate_with_index(
    path: &[Point],
    stations: &[GeneratedStation],
    points: &[Point],
    index: &NearestIndex<'_>,
    speed_kmph: f64,
    step_km: f64,
) -> Vec<VisitRecord> {
    let mut walker = Walker {
        index,
        points,
        step_km,
        pieces: Vec::new(),
    };
    let mut offset = 0.0;
    for w in path.windows(2) {
        offset += walker.walk_segment(w[0], w[1], offset);
    }
    if path.len() == 1 {
        walker.walk_segment(path[0], path[0], 0.0);
    }
    let to_ms = |km: f64| (km / speed_kmph * 3_600_000.0).round() as u64;
    let mut order: Vec<usize> = Vec::new();
    let mut totals: BTreeMap<usize, u64> = BTreeMap::new();
    for (i, &(station, start)) in walker.pieces.iter().enumerate() {
        let end = walker.pieces.get(i + 1).map_or(offset, |p| p.1);
        let ms = to_ms(end) - to_ms(start);
        if ms == 0 {
            continue;
        }
        let slot = totals.entry(station).or_insert_with(|| {
            order.push(station);
            0
        });
        *slot += ms;
    }
    if order.is_empty() {
        let s = walker.pieces.first().map_or_else(|| index.nearest(path[0]), |p| p.0);
        order.push(s);
        totals.insert(s, 1);
    }
    order
        .into_iter()
        .map(|s| VisitRecord::new(stations[s].id, totals[&s], stations[s].per_user_throughput_kbps))
        .collect()
}

/// Shortest route on the road grid: access leg to the nearest grid node, an
/// L-shaped grid path, then the leg to the destination.
pub fn road_route(from: Point, to: Point, config: &CityConfig, horizontal_first: bool) -> Vec<Point> {
    let s = config.grid_spacing_km;
    let max_x = (config.width_km / s).floor() * s;
    let max_y = (config.height_km / s).floor() * s;
    let snap = |p: Point| Point::new(((p.x_km / s).round() * s).clamp(0.0, max_x), ((p.y_km / s).round() * s).clamp(0.0, max_y));
    let (a, b) = (snap(from), snap(to));
    let corner = if horizontal_first {
        Point::new(b.x_km, a.y_km)
    } else {
        Point::new(a.x_km, b.y_km)
    };
    let mut route = vec![from];
    for p in [a, corner, b, to] {
        if *route.last().unwrap() != p {
            route.push(p);
        }
    }
    route
}

/// Commute trajectories between random home/office pairs.
pub fn generate_trajectories(
    config: &CityConfig,
    city: &City,
    stations: &[GeneratedStation],
    num_trajectories: usize,
    seed: u64,
) -> Result<(Vec<Trajectory>, Vec<u32>), GenError> {
    if city.homes.is_empty() || city.offices.is_empty() {
        return Err(GenError::NoPoints);
    }
    if stations.is_empty() {
        return Err(GenError::ZeroStations);
    }
    let points: Vec<Point> = stations.iter().map(|s| s.position).collect();
    let index = NearestIndex::new(&points);
    let mut rng = ScenarioRng::new(seed, Phase::Trajectories);
    let mut trajectories = Vec::with_capacity(num_trajectories);
    let mut departures = Vec::with_capacity(num_trajectories);
    let window = (config.commute_start_h * 3600.0, config.commute_end_h * 3600.0);
    for j in 0..num_trajectories {
        let home = city.homes[rng.below(city.homes.len())];
        let office = city.offices[rng.below(city.offices.len())];
        let horizontal_first = rng.chance(0.5);
        departures.push(rng.range(window.0, window.1) as u32);
        let route = road_route(home, office, config, horizontal_first);
        let visits = associate_with_index(
            &route,
            stations,
            &points,
            &index,
            config.road_speed_kmph,
            config.handoff_step_km,
        );
        trajectories.push(Trajectory::new(j as u64, visits));
    }
    Ok((trajectories, departures))
}

fn generate_city_topology(config: &ScenarioConfig) -> Result<GeneratedScenario, GenError> {
    let city = generate_city(&config.city)?;
    let stations = generate_network(&config.network, &city.homes, &city.offices)?;
    let (trajectories, departures_s) =
        generate_trajectories(&config.city, &city, &stations, config.num_trajectories, config.seed)?;
    Ok(GeneratedScenario {
        stations,
        trajectories,
        departures_s,
        provenance: provenance(config),
    })
}

fn provenance(config: &ScenarioConfig) -> Provenance {
    Provenance {
        topology: config.topology,
        seed: config.seed,
        num_trajectories: config.num_trajectories,
        city: config.city.clone(),
        network: config.network.clone(),
    }
}

/// Random-assignment counterpart of a city scenario: trajectory lengths are
/// drawn from the lengths the city pipeline produces for the same config,
/// and stations are assigned uniformly without replacement.
fn generate_mesh_topology(config: &ScenarioConfig) -> Result<GeneratedScenario, GenError> {
    let reference = generate_city_topology(config)?;
    let lengths: Vec<usize> = reference.trajectories.iter().map(Trajectory::length).collect();
    let n = config
        .network
        .num_stations
        .unwrap_or(reference.stations.len());
    if n == 0 {
        return Err(GenError::ZeroStations);
    }

    let mut rng = ScenarioRng::new(config.network.seed, Phase::Mesh);
    let stations: Vec<GeneratedStation> = (0..n)
        .map(|i| {
            let p = Point::new(rng.range(0.0, config.city.width_km), rng.range(0.0, config.city.height_km));
            draw_station(&mut rng, &config.network, i as u32, p)
        })
        .collect();

    let window = (config.city.commute_start_h * 3600.0, config.city.commute_end_h * 3600.0);
    let mut pool: Vec<usize> = (0..n).collect();
    let mut trajectories = Vec::with_capacity(config.num_trajectories);
    let mut departures = Vec::with_capacity(config.num_trajectories);
    for j in 0..config.num_trajectories {
        let length = lengths[rng.below(lengths.len())];
        if length > n {
            return Err(GenError::LengthExceedsStations { length, stations: n });
        }
        // partial Fisher-Yates
        for i in 0..length {
            let k = i + rng.below(n - i);
            pool.swap(i, k);
        }
        departures.push(rng.range(window.0, window.1) as u32);
        let visits = pool[..length]
            .iter()
            .map(|&s| VisitRecord::new(stations[s].id, 60_000, stations[s].per_user_throughput_kbps))
            .collect();
        trajectories.push(Trajectory::new(j as u64, visits));
    }
    Ok(GeneratedScenario {
        stations,
        trajectories,
        departures_s: departures,
        provenance: provenance(config),
    })
}

/// Generates the scenario described by `config`.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<GeneratedScenario, GenError> {
    config.validate()?;
    match config.topology {
        Topology::City | Topology::Star => generate_city_topology(config),
        Topology::Mesh => generate_mesh_topology(config),
    }
}

fn star_family(topology: Topology, num_trajectories: usize, num_stations: usize, seed: u64) -> Result<GeneratedScenario, GenError> {
    let mut config = Preset::Star.config(seed);
    config.topology = topology;
    config.num_trajectories = num_trajectories;
    config.city.num_homes = num_trajectories;
    config.city.num_offices = (num_trajectories / STAR_OFFICE_RATIO).max(1);
    config.network.num_stations = Some(num_stations);
    generate_scenario(&config)
}

/// Commuters per office in the Star layout.
const STAR_OFFICE_RATIO: usize = 20;

/// Star layout: offices packed in a small central square, homes in a thin
/// outer ring, nothing in between.
pub fn generate_star(num_trajectories: usize, num_stations: usize, seed: u64) -> Result<GeneratedScenario, GenError> {
    star_family(Topology::Star, num_trajectories, num_stations, seed)
}

/// Mesh layout at the same size as [`generate_star`]: trajectory lengths
/// follow the Star scenario for the same seed, stations are random.
pub fn generate_mesh(num_trajectories: usize, num_stations: usize, seed: u64) -> Result<GeneratedScenario, GenError> {
    star_family(Topology::Mesh, num_trajectories, num_stations, seed)
}

/// Shipped parameter sets. City presets are illustrative shapes (dense vs
/// sparse business district), not calibrated to survey data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Star,
    Mesh,
    NycLike,
    AtlantaLike,
    BangaloreLike,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Star,
        Preset::Mesh,
        Preset::NycLike,
        Preset::AtlantaLike,
        Preset::BangaloreLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Star => "star",
            Preset::Mesh => "mesh",
            Preset::NycLike => "nyc-like",
            Preset::AtlantaLike => "atlanta-like",
            Preset::BangaloreLike => "bangalore-like",
        }
    }

    pub fn config(self, seed: u64) -> ScenarioConfig {
        let layer = |name, area_fraction, home_density, office_density| LayerConfig {
            name,
            area_fraction,
            home_density,
            office_density,
        };
        let city = |w, h, layers, people, grid| CityConfig {
            seed,
            width_km: w,
            height_km: h,
            layers,
            num_homes: people,
            num_offices: people,
            grid_spacing_km: grid,
            road_speed_kmph: 30.0,
            commute_start_h: default_commute_start(),
            commute_end_h: default_commute_end(),
            handoff_step_km: default_handoff_step(),
        };
        let network = |stations: usize, cell: f64| NetworkConfig {
            num_stations: Some(stations),
            cell_size_km: cell,
            ..NetworkConfig::with_seed(seed)
        };
        use LayerName::*;
        let (topology, m, mut city, network) = match self {
            Preset::Star | Preset::Mesh => (
                if self == Preset::Star { Topology::Star } else { Topology::Mesh },
                5_000,
                city(
                    10.0,
                    14.0,
                    vec![layer(CBD, 0.03, 0.0, 1.0), layer(SD, 0.87, 0.0, 0.0), layer(UE, 0.10, 1.0, 0.0)],
                    5_000,
                    0.25,
                ),
                network(430, 0.5),
            ),
            Preset::NycLike => (
                Topology::City,
                50_000,
                city(
                    46.0,
                    64.0,
                    vec![
                        layer(CBD, 0.06, 1.0, 100.0),
                        layer(SD, 0.465, 0.0, 0.5),
                        layer(UE, 0.005, 400.0, 1.0),
                        layer(EC, 0.47, 0.1, 0.05),
                    ],
                    50_000,
                    0.5,
                ),
                network(13_860, 1.0),
            ),
            Preset::AtlantaLike => (
                Topology::City,
                50_000,
                city(
                    42.0,
                    61.0,
                    vec![
                        layer(CBD, 0.01, 1.0, 4.0),
                        layer(SD, 0.09, 1.0, 2.0),
                        layer(UE, 0.40, 1.0, 1.5),
                        layer(EC, 0.50, 1.0, 1.0),
                    ],
                    50_000,
                    0.5,
                ),
                network(11_213, 1.0),
            ),
            Preset::BangaloreLike => (
                Topology::City,
                25_000,
                city(
                    18.0,
                    18.0,
                    vec![
                        layer(CBD, 0.05, 1.0, 30.0),
                        layer(UE, 0.45, 3.0, 2.0),
                        layer(EC, 0.50, 2.0, 0.5),
                    ],
                    25_000,
                    0.25,
                ),
                network(1_894, 0.5),
            ),
        };
        if matches!(self, Preset::Star | Preset::Mesh) {
            city.num_offices = m / STAR_OFFICE_RATIO;
        }
        ScenarioConfig {
            topology,
            seed,
            num_trajectories: m,
            city,
            network,
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                format!("unknown preset `{s}` (expected one of {})", names.join(", "))
            })
    }
}
