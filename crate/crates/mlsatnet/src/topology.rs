//! Intra-layer grid+ topologies and the stacked multi-layer graph.
//!
//! Each layer carries the standard grid+ inter-satellite pattern: a ring
//! within every plane plus one link to the same slot of the next plane,
//! with the seam between the last and first plane shifted by the phase
//! factor so the torus closes on the phased neighbor. Layers are joined
//! into one supra graph by inter-layer connections (ILCs), at most one per
//! satellite. Path-length measurement is exact all-pairs breadth-first
//! search; unreachable pairs are counted separately, never averaged in.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constellation::{SatelliteId, WalkerSpec};

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("ilc endpoint {0:?} does not belong to any assembled layer")]
    UnknownEndpoint(SatelliteId),
    #[error("satellite {0:?} carries more than one ilc")]
    DuplicateEndpoint(SatelliteId),
    #[error("ilc must join two distinct layers, got {0:?} - {1:?}")]
    SameLayerIlc(SatelliteId, SatelliteId),
    #[error("layer index {0} assembled more than once")]
    DuplicateLayer(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    IntraPlane,
    InterPlane,
    Ilc,
}

/// Whether the seam link from the last plane back to plane 0 lands on the
/// phase-shifted slot (s + F) or on the same slot s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeamMode {
    #[default]
    PhaseShifted,
    Aligned,
}

/// Undirected intra-layer link set over the flat plane-major index.
#[derive(Debug, Clone)]
pub struct LayerTopology {
    pub layer: usize,
    pub planes: usize,
    pub sats_per_plane: usize,
    pub n: usize,
    /// Edges as (lo, hi) flat index pairs.
    pub edges: Vec<(u32, u32, EdgeKind)>,
    /// True when the pattern could not be 4-regular (fewer than 3 planes
    /// or fewer than 3 slots per plane).
    pub degenerate: bool,
}

impl LayerTopology {
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &(a, b, _) in &self.edges {
            deg[a as usize] += 1;
            deg[b as usize] += 1;
        }
        deg
    }
}

/// Builds the grid+ pattern for a layer.
pub fn build_gridplus(layer: usize, spec: &WalkerSpec, seam: SeamMode) -> LayerTopology {
    let p = spec.planes;
    let s = spec.sats_per_plane;
    let idx = |plane: usize, slot: usize| (plane * s + slot) as u32;
    let mut set: BTreeSet<(u32, u32, EdgeKind)> = BTreeSet::new();
    let mut insert = |a: u32, b: u32, kind: EdgeKind| {
        if a != b {
            set.insert((a.min(b), a.max(b), kind));
        }
    };
    for plane in 0..p {
        for slot in 0..s {
            if s > 1 {
                insert(idx(plane, slot), idx(plane, (slot + 1) % s), EdgeKind::IntraPlane);
            }
            if p > 1 {
                if plane + 1 < p {
                    insert(idx(plane, slot), idx(plane + 1, slot), EdgeKind::InterPlane);
                } else {
                    let target = match seam {
                        SeamMode::PhaseShifted => (slot + spec.phase_factor) % s,
                        SeamMode::Aligned => slot,
                    };
                    insert(idx(plane, slot), idx(0, target), EdgeKind::InterPlane);
                }
            }
        }
    }
    LayerTopology {
        layer,
        planes: p,
        sats_per_plane: s,
        n: p * s,
        edges: set.into_iter().collect(),
        degenerate: p < 3 || s < 3,
    }
}

/// Block-structured graph over the union of several layers.
///
/// Node i of layer l sits at `offsets[l] + i`; off-diagonal blocks hold
/// only ILC edges, so the whole matrix is symmetric by construction.
#[derive(Debug, Clone)]
pub struct SupraAdjacency {
    pub layer_ids: Vec<usize>,
    pub layer_sizes: Vec<usize>,
    pub offsets: Vec<usize>,
    pub n: usize,
    pub edges: Vec<(u32, u32, EdgeKind)>,
    adj: Vec<Vec<u32>>,
}

impl SupraAdjacency {
    /// Global node index of a satellite id.
    pub fn node(&self, id: SatelliteId, sats_per_plane: usize) -> Option<usize> {
        let l = self.layer_ids.iter().position(|&x| x == id.layer)?;
        let flat = id.flat(sats_per_plane);
        (flat < self.layer_sizes[l]).then(|| self.offsets[l] + flat)
    }

    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.adj[node]
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(|a| a.len()).collect()
    }

    /// Degrees of one layer's nodes within the full graph.
    pub fn layer_degrees(&self, layer_pos: usize) -> Vec<usize> {
        let lo = self.offsets[layer_pos];
        let hi = lo + self.layer_sizes[layer_pos];
        (lo..hi).map(|i| self.adj[i].len()).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Verifies undirectedness: every stored arc has its mirror.
    pub fn is_symmetric(&self) -> bool {
        self.adj
            .iter()
            .enumerate()
            .all(|(i, nb)| nb.iter().all(|&j| self.adj[j as usize].contains(&(i as u32))))
    }
}

/// Stacks layers and ILCs into one supra graph.
///
/// ILC endpoints are given as logical ids; each satellite may appear in at
/// most one ILC because it has a single inter-layer terminal.
pub fn assemble_supra(
    layers: &[&LayerTopology],
    ilcs: &[(SatelliteId, SatelliteId)],
) -> Result<SupraAdjacency, TopologyError> {
    let mut layer_ids = Vec::with_capacity(layers.len());
    let mut layer_sizes = Vec::with_capacity(layers.len());
    let mut offsets = Vec::with_capacity(layers.len());
    let mut n = 0usize;
    for t in layers {
        if layer_ids.contains(&t.layer) {
            return Err(TopologyError::DuplicateLayer(t.layer));
        }
        layer_ids.push(t.layer);
        layer_sizes.push(t.n);
        offsets.push(n);
        n += t.n;
    }
    let mut edges: Vec<(u32, u32, EdgeKind)> = Vec::new();
    for (pos, t) in layers.iter().enumerate() {
        let off = offsets[pos] as u32;
        for &(a, b, kind) in &t.edges {
            edges.push((a + off, b + off, kind));
        }
    }
    let locate = |id: SatelliteId| -> Result<usize, TopologyError> {
        let pos = layer_ids
            .iter()
            .position(|&l| l == id.layer)
            .ok_or(TopologyError::UnknownEndpoint(id))?;
        let flat = id.flat(layers[pos].sats_per_plane);
        if flat >= layer_sizes[pos] {
            return Err(TopologyError::UnknownEndpoint(id));
        }
        Ok(offsets[pos] + flat)
    };
    let mut used: BTreeSet<usize> = BTreeSet::new();
    for &(a, b) in ilcs {
        if a.layer == b.layer {
            return Err(TopologyError::SameLayerIlc(a, b));
        }
        let na = locate(a)?;
        let nb = locate(b)?;
        if !used.insert(na) {
            return Err(TopologyError::DuplicateEndpoint(a));
        }
        if !used.insert(nb) {
            return Err(TopologyError::DuplicateEndpoint(b));
        }
        edges.push((na.min(nb) as u32, na.max(nb) as u32, EdgeKind::Ilc));
    }
    let mut adj = vec![Vec::new(); n];
    for &(a, b, _) in &edges {
        adj[a as usize].push(b);
        adj[b as usize].push(a);
    }
    for nb in &mut adj {
        nb.sort_unstable();
    }
    Ok(SupraAdjacency {
        layer_ids,
        layer_sizes,
        offsets,
        n,
        edges,
        adj,
    })
}

/// Result of exact all-pairs breadth-first search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AplResult {
    /// Mean hop count over reachable unordered pairs.
    pub apl: f64,
    pub reachable_pairs: u64,
    pub unreachable_pairs: u64,
    pub total_hops: u64,
}

/// Exact average path length by breadth-first search from every node.
/// Sources run in parallel; all accumulation is integer, so the result is
/// identical for any thread count.
pub fn bfs_apl(g: &SupraAdjacency) -> AplResult {
    // Flatten to CSR once; BFS touches it read-only from every thread.
    let n = g.n;
    let mut offsets = Vec::with_capacity(n + 1);
    let mut targets = Vec::new();
    offsets.push(0u32);
    for nb in &g.adj {
        targets.extend_from_slice(nb);
        offsets.push(targets.len() as u32);
    }
    let per_source = |src: usize| -> (u64, u64) {
        let mut dist = vec![u32::MAX; n];
        let mut queue = Vec::with_capacity(n);
        dist[src] = 0;
        queue.push(src as u32);
        let mut head = 0;
        let mut sum = 0u64;
        let mut reached = 0u64;
        while head < queue.len() {
            let v = queue[head] as usize;
            head += 1;
            let d = dist[v];
            sum += d as u64;
            reached += 1;
            for &w in &targets[offsets[v] as usize..offsets[v + 1] as usize] {
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = d + 1;
                    queue.push(w);
                }
            }
        }
        (sum, reached - 1)
    };
    let (total_hops, reachable_ordered) = (0..n)
        .into_par_iter()
        .map(per_source)
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let all_ordered = (n as u64) * (n as u64 - 1);
    AplResult {
        apl: if reachable_ordered > 0 {
            total_hops as f64 / reachable_ordered as f64
        } else {
            0.0
        },
        reachable_pairs: reachable_ordered / 2,
        unreachable_pairs: (all_ordered - reachable_ordered) / 2,
        total_hops: total_hops / 2,
    }
}

/// Empirical degree distribution with its first two moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    counts: BTreeMap<usize, usize>,
    pub n: usize,
}

impl DegreeDistribution {
    pub fn from_degrees(degrees: impl IntoIterator<Item = usize>) -> Self {
        let mut counts = BTreeMap::new();
        let mut n = 0;
        for d in degrees {
            *counts.entry(d).or_insert(0) += 1;
            n += 1;
        }
        DegreeDistribution { counts, n }
    }

    /// Probability mass at degree q.
    pub fn probability(&self, q: usize) -> f64 {
        *self.counts.get(&q).unwrap_or(&0) as f64 / self.n as f64
    }

    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.counts
            .iter()
            .map(|(&q, &c)| (q, c as f64 / self.n as f64))
    }

    /// Mean degree.
    pub fn first_moment(&self) -> f64 {
        self.counts
            .iter()
            .map(|(&q, &c)| q as f64 * c as f64)
            .sum::<f64>()
            / self.n as f64
    }

    /// Mean squared degree.
    pub fn second_moment(&self) -> f64 {
        self.counts
            .iter()
            .map(|(&q, &c)| (q * q) as f64 * c as f64)
            .sum::<f64>()
            / self.n as f64
    }
}

/// Degree distribution of a whole supra graph.
pub fn degree_distribution(g: &SupraAdjacency) -> DegreeDistribution {
    DegreeDistribution::from_degrees(g.degrees())
}
