//! Hypergraph view of an instance: stations are nodes, each trajectory is a
//! hyper-edge over the stations it visits.

use std::collections::BTreeSet;

use crate::model::{ModelError, ProblemInstance, StationId, WEIGHT_SCALE};

/// One incidence of a node on a hyper-edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub trajectory: usize,
    pub(crate) cell: usize,
    pub bottleneck: bool,
}

#[derive(Debug, Clone)]
pub struct HyperGraph {
    nodes: Vec<StationId>,
    edge_offsets: Vec<usize>,
    edge_nodes: Vec<u32>,
    incidence_offsets: Vec<usize>,
    incidence: Vec<Incidence>,
    weight_units: Vec<u64>,
}

pub fn build_hypergraph(instance: &ProblemInstance) -> HyperGraph {
    let n = instance.n();
    let mut degree = vec![0usize; n];
    let mut edge_offsets = Vec::with_capacity(instance.m() + 1);
    let mut edge_nodes = Vec::new();
    edge_offsets.push(0);
    for j in 0..instance.m() {
        for c in instance.cell_range(j) {
            let v = instance.cell_station(c);
            degree[v] += 1;
            edge_nodes.push(v as u32);
        }
        edge_offsets.push(edge_nodes.len());
    }

    let mut incidence_offsets = Vec::with_capacity(n + 1);
    incidence_offsets.push(0);
    for d in &degree {
        incidence_offsets.push(incidence_offsets.last().unwrap() + d);
    }
    let mut fill = incidence_offsets.clone();
    let mut incidence = vec![
        Incidence {
            trajectory: 0,
            cell: 0,
            bottleneck: false
        };
        edge_nodes.len()
    ];
    let mut weight_units = vec![0u64; n];
    // trajectories are visited in index order, so incidence lists come out sorted
    for j in 0..instance.m() {
        for c in instance.cell_range(j) {
            let v = instance.cell_station(c);
            let bottleneck = instance.cell_bottleneck(c);
            incidence[fill[v]] = Incidence {
                trajectory: j,
                cell: c,
                bottleneck,
            };
            fill[v] += 1;
            if bottleneck {
                weight_units[v] += instance.cell_weight_units(j, c);
            }
        }
    }

    HyperGraph {
        nodes: instance.stations().to_vec(),
        edge_offsets,
        edge_nodes,
        incidence_offsets,
        incidence,
        weight_units,
    }
}

impl HyperGraph {
    pub fn nodes(&self) -> &[StationId] {
        &self.nodes
    }

    pub fn edge_count(&self) -> usize {
        self.edge_offsets.len() - 1
    }

    /// Dense node indices on hyper-edge `j`, ascending.
    pub fn edge(&self, j: usize) -> &[u32] {
        &self.edge_nodes[self.edge_offsets[j]..self.edge_offsets[j + 1]]
    }

    pub fn incidence(&self, v: usize) -> &[Incidence] {
        &self.incidence[self.incidence_offsets[v]..self.incidence_offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.incidence_offsets[v + 1] - self.incidence_offsets[v]
    }

    pub fn degree_of(&self, id: StationId) -> Option<usize> {
        self.index_of(id).map(|v| self.degree(v))
    }

    pub fn index_of(&self, id: StationId) -> Option<usize> {
        self.nodes.binary_search(&id).ok()
    }

    /// Bottleneck-weight: sum of `w_ji` over trajectories for which the node
    /// is a bottleneck.
    pub fn bottleneck_weight(&self, v: usize) -> f64 {
        self.weight_units[v] as f64 / WEIGHT_SCALE as f64
    }

    pub fn bottleneck_weight_of(&self, id: StationId) -> Option<f64> {
        self.index_of(id).map(|v| self.bottleneck_weight(v))
    }

    pub(crate) fn weight_units(&self, v: usize) -> u64 {
        self.weight_units[v]
    }

    /// Upgrade candidates: nodes that are a bottleneck for some trajectory.
    pub fn is_candidate(&self, v: usize) -> bool {
        self.weight_units[v] > 0
    }
}

/// `w(S)`: trajectories that are γ-bottleneck-free with `S` upgraded.
///
/// Walks only the hyper-edges incident on `S`; every other trajectory keeps
/// its no-upgrade status.
pub fn set_weight(
    graph: &HyperGraph,
    instance: &ProblemInstance,
    set: &BTreeSet<StationId>,
) -> Result<usize, ModelError> {
    let mut chosen = Vec::with_capacity(set.len());
    for s in set {
        chosen.push(graph.index_of(*s).ok_or(ModelError::UnknownStation(*s))?);
    }
    let m = instance.m();
    let mut extra = vec![0u64; m];
    let mut touched = Vec::new();
    for &v in &chosen {
        for inc in graph.incidence(v) {
            if extra[inc.trajectory] == 0 && inc.bottleneck {
                touched.push(inc.trajectory);
            }
            if inc.bottleneck {
                extra[inc.trajectory] += instance.cell_duration(inc.cell);
            }
        }
    }
    let baseline = (0..m)
        .filter(|&j| instance.meets(j, instance.base_ms(j)))
        .count();
    let mut weight = baseline;
    for j in touched {
        let before = instance.meets(j, instance.base_ms(j));
        let after = instance.meets(j, instance.base_ms(j) + extra[j]);
        match (before, after) {
            (false, true) => weight += 1,
            (true, false) => weight -= 1,
            _ => {}
        }
    }
    Ok(weight)
}
