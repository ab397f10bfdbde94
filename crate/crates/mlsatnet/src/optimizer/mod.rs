//! Inter-layer connection deployment strategies.
//!
//! Everything here consumes a [`TwoLayerContext`]: two propagated layers,
//! their grid+ topologies, and the screened candidate set of one layer
//! interface. Strategies produce an [`Assignment`] (a disjoint set of
//! candidate pairs for one slot) or a [`Schedule`] (one assignment per
//! slot of the horizon). Exhaustive search provides ground truth at toy
//! scale; the evolutionary pipeline scales beyond it.

mod baselines;
mod exact;
mod hungarian;
mod otlc;
mod tpilcd;

pub use baselines::{greedy_shortest, max_time_weight, random_uniform};
pub use exact::{exact_min_apl, ExactResult, DEFAULT_EXACT_BUDGET};
pub use hungarian::{mtwm, MtwmResult, INADMISSIBLE_WEIGHT};
pub use otlc::{otlc, FitnessMode, GaConfig, GenerationStat, OpCounters, OtlcResult};
pub use tpilcd::{schedule_with_hysteresis, tpilcd, SlotDiag, TpilcdOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aplmodel::{
    crosslayer_apl, monolayer_apl, pair_count, total_apl_two_layer, AplError, LayerMoments,
};
use crate::constellation::{
    build_constellation, propagate, ConstellationError, Ephemeris, PhasingConvention, SatelliteId,
    TimeGrid, WalkerSpec,
};
use crate::linkmodel::{build_candidate_set, CandidateSet, LinkError};
use crate::topology::{
    assemble_supra, bfs_apl, build_gridplus, AplResult, LayerTopology, SeamMode, SupraAdjacency,
    TopologyError,
};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("need {needed} disjoint links but only {available} could be placed")]
    InfeasibleK { needed: usize, available: usize },
    #[error("need at least one link; k = 0 has nothing to optimize")]
    KZero,
    #[error(
        "exhaustive search exceeded its budget of {budget} matchings; use a heuristic strategy"
    )]
    BudgetExceeded { budget: u64 },
    #[error("weight matrix must be square and non-empty, got {rows}x{cols}")]
    BadMatrix { rows: usize, cols: usize },
    #[error("no perfect matching avoids inadmissible pairs")]
    NoPerfectMatching,
    #[error("slot {slot} outside horizon of {n_slots} slots")]
    SlotOutOfRange { slot: usize, n_slots: usize },
    #[error(transparent)]
    Constellation(#[from] ConstellationError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Apl(#[from] AplError),
}

/// A disjoint set of deployed inter-layer connections, canonically sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub pairs: Vec<(SatelliteId, SatelliteId)>,
}

impl Assignment {
    pub fn empty() -> Self {
        Assignment { pairs: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// One assignment per slot of the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub per_slot: Vec<Assignment>,
}

/// Side constraints on an assignment beyond endpoint disjointness.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AssignmentConstraints {
    /// Cap on links touching any single orbit plane (either layer).
    pub max_per_plane: Option<usize>,
}

/// Tracks endpoint and per-plane usage while building an assignment.
#[derive(Debug, Clone)]
pub(crate) struct ConstraintTracker {
    used_a: Vec<bool>,
    used_b: Vec<bool>,
    plane_a: Vec<usize>,
    plane_b: Vec<usize>,
    max_per_plane: Option<usize>,
}

impl ConstraintTracker {
    pub fn new(ctx: &TwoLayerContext, constraints: AssignmentConstraints) -> Self {
        ConstraintTracker {
            used_a: vec![false; ctx.eph_a.n_sats()],
            used_b: vec![false; ctx.eph_b.n_sats()],
            plane_a: vec![0; ctx.eph_a.spec.planes],
            plane_b: vec![0; ctx.eph_b.spec.planes],
            max_per_plane: constraints.max_per_plane,
        }
    }

    pub fn admits(&self, ctx: &TwoLayerContext, cand_idx: usize) -> bool {
        let c = &ctx.candidates.candidates[cand_idx];
        if self.used_a[c.a_flat] || self.used_b[c.b_flat] {
            return false;
        }
        if let Some(cap) = self.max_per_plane {
            if self.plane_a[c.a.plane] >= cap || self.plane_b[c.b.plane] >= cap {
                return false;
            }
        }
        true
    }

    pub fn push(&mut self, ctx: &TwoLayerContext, cand_idx: usize) {
        let c = &ctx.candidates.candidates[cand_idx];
        self.used_a[c.a_flat] = true;
        self.used_b[c.b_flat] = true;
        self.plane_a[c.a.plane] += 1;
        self.plane_b[c.b.plane] += 1;
    }

    pub fn remove(&mut self, ctx: &TwoLayerContext, cand_idx: usize) {
        let c = &ctx.candidates.candidates[cand_idx];
        self.used_a[c.a_flat] = false;
        self.used_b[c.b_flat] = false;
        self.plane_a[c.a.plane] -= 1;
        self.plane_b[c.b.plane] -= 1;
    }
}

/// Two propagated layers, their topologies, and the screened interface.
#[derive(Debug, Clone)]
pub struct TwoLayerContext {
    pub eph_a: Ephemeris,
    pub eph_b: Ephemeris,
    pub topo_a: LayerTopology,
    pub topo_b: LayerTopology,
    pub candidates: CandidateSet,
    base_degrees_a: Vec<usize>,
    base_degrees_b: Vec<usize>,
    intra_adj_a: Vec<Vec<u32>>,
    intra_adj_b: Vec<Vec<u32>>,
}

fn intra_adjacency(topo: &LayerTopology) -> Vec<Vec<u32>> {
    let mut adj = vec![Vec::new(); topo.n];
    for &(a, b, _) in &topo.edges {
        adj[a as usize].push(b);
        adj[b as usize].push(a);
    }
    adj
}

impl TwoLayerContext {
    /// Builds, propagates and screens a two-layer stack on a shared grid.
    pub fn build(
        spec_a: &WalkerSpec,
        spec_b: &WalkerSpec,
        grid: &TimeGrid,
        eta1: f64,
        eta2: f64,
        convention: PhasingConvention,
        seam: SeamMode,
    ) -> Result<Self, OptimizerError> {
        let def_a = build_constellation(0, spec_a, convention)?;
        let def_b = build_constellation(1, spec_b, convention)?;
        let eph_a = propagate(&def_a, grid);
        let eph_b = propagate(&def_b, grid);
        let topo_a = build_gridplus(0, spec_a, seam);
        let topo_b = build_gridplus(1, spec_b, seam);
        let candidates = build_candidate_set(&eph_a, &eph_b, eta1, eta2)?;
        let base_degrees_a = topo_a.degrees();
        let base_degrees_b = topo_b.degrees();
        let intra_adj_a = intra_adjacency(&topo_a);
        let intra_adj_b = intra_adjacency(&topo_b);
        Ok(TwoLayerContext {
            eph_a,
            eph_b,
            topo_a,
            topo_b,
            candidates,
            base_degrees_a,
            base_degrees_b,
            intra_adj_a,
            intra_adj_b,
        })
    }

    pub fn n_slots(&self) -> usize {
        self.candidates.grid.n_slots
    }

    /// Converts candidate indices to id pairs, canonically sorted.
    pub fn assignment_from_indices(&self, indices: &[usize]) -> Assignment {
        let mut indices: Vec<usize> = indices.to_vec();
        indices.sort_unstable();
        Assignment {
            pairs: indices
                .iter()
                .map(|&i| {
                    let c = &self.candidates.candidates[i];
                    (c.a, c.b)
                })
                .collect(),
        }
    }

    /// Candidate index of an id pair, if that pair was screened in.
    pub fn find_pair(&self, a: SatelliteId, b: SatelliteId) -> Option<usize> {
        self.candidates.find(
            a.flat(self.eph_a.spec.sats_per_plane),
            b.flat(self.eph_b.spec.sats_per_plane),
        )
    }

    /// Supra graph of the stack with the given links deployed.
    pub fn supra_with(
        &self,
        pairs: &[(SatelliteId, SatelliteId)],
    ) -> Result<SupraAdjacency, OptimizerError> {
        Ok(assemble_supra(&[&self.topo_a, &self.topo_b], pairs)?)
    }

    /// Exact path-length measurement for an assignment.
    pub fn measured_apl(
        &self,
        pairs: &[(SatelliteId, SatelliteId)],
    ) -> Result<AplResult, OptimizerError> {
        Ok(bfs_apl(&self.supra_with(pairs)?))
    }

    /// Closed-form path-length model for an assignment, using each
    /// layer's empirical post-deployment degree moments.
    pub fn analytic_apl(
        &self,
        pairs: &[(SatelliteId, SatelliteId)],
    ) -> Result<f64, OptimizerError> {
        let spp_a = self.eph_a.spec.sats_per_plane;
        let spp_b = self.eph_b.spec.sats_per_plane;
        let mut deg_a = self.base_degrees_a.clone();
        let mut deg_b = self.base_degrees_b.clone();
        for &(a, b) in pairs {
            deg_a[a.flat(spp_a)] += 1;
            deg_b[b.flat(spp_b)] += 1;
        }
        let moments = |degs: &[usize]| {
            let n = degs.len() as f64;
            let h1 = degs.iter().map(|&d| d as f64).sum::<f64>() / n;
            let h2 = degs.iter().map(|&d| (d * d) as f64).sum::<f64>() / n - h1;
            LayerMoments::new(degs.len(), h1, h2)
        };
        let ma = moments(&deg_a);
        let mb = moments(&deg_b);
        let da = monolayer_apl(&ma)?;
        let db = monolayer_apl(&mb)?;
        if pairs.is_empty() {
            // No interface: average the two intra-layer means over their
            // own pair counts, matching the reachable-pairs semantics of
            // the exact measurement.
            let ea = pair_count(ma.n);
            let eb = pair_count(mb.n);
            return Ok((da * ea + db * eb) / (ea + eb));
        }
        // The second stage of the cross-layer search runs in the smaller
        // layer, whose size caps the number of interface links.
        let (d_big, m_small, d_small) = if ma.n >= mb.n {
            (da, mb, db)
        } else {
            (db, ma, da)
        };
        let d12 = crosslayer_apl(d_big, m_small.n, pairs.len(), m_small.chi())?;
        Ok(total_apl_two_layer(
            d_big,
            d_small,
            d12,
            ma.n.max(mb.n),
            ma.n.min(mb.n),
        ))
    }

    /// Removes every candidate touching the given satellites (flat
    /// indices per side). Used when chaining interfaces through a stack:
    /// a satellite already carrying a terminal on one interface cannot
    /// offer it to the next. Candidate weights keep their original
    /// normalization.
    pub fn mask_satellites(&mut self, a_flats: &[usize], b_flats: &[usize]) {
        if a_flats.is_empty() && b_flats.is_empty() {
            return;
        }
        let mut drop_a = vec![false; self.eph_a.n_sats()];
        let mut drop_b = vec![false; self.eph_b.n_sats()];
        for &f in a_flats {
            drop_a[f] = true;
        }
        for &f in b_flats {
            drop_b[f] = true;
        }
        self.candidates
            .candidates
            .retain(|c| !drop_a[c.a_flat] && !drop_b[c.b_flat]);
    }

    /// Mirror of a satellite: half the planes and half the in-plane slots
    /// away, the logical index of the antipodal surface position.
    pub fn mirror_id(&self, id: SatelliteId) -> SatelliteId {
        let spec = if id.layer == self.eph_a.layer {
            &self.eph_a.spec
        } else {
            &self.eph_b.spec
        };
        SatelliteId::new(
            id.layer,
            (id.plane + spec.planes / 2) % spec.planes,
            (id.slot + spec.sats_per_plane / 2) % spec.sats_per_plane,
        )
    }

    /// Supra degree of every satellite under an assignment given by
    /// candidate indices: grid+ degree plus one per deployed terminal.
    pub(crate) fn supra_degrees(&self, indices: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let mut da = self.base_degrees_a.clone();
        let mut db = self.base_degrees_b.clone();
        for &i in indices {
            let c = &self.candidates.candidates[i];
            da[c.a_flat] += 1;
            db[c.b_flat] += 1;
        }
        (da, db)
    }

    /// Hub test used by degree-aware deletion: a satellite already
    /// carrying a terminal, or sitting in a neighborhood whose mean
    /// degree exceeds the layer mean.
    pub(crate) fn is_hub(
        &self,
        side_a: bool,
        flat: usize,
        deg_a: &[usize],
        deg_b: &[usize],
    ) -> bool {
        let (deg, adj) = if side_a {
            (deg_a, &self.intra_adj_a)
        } else {
            (deg_b, &self.intra_adj_b)
        };
        if deg[flat] >= 5 {
            return true;
        }
        let nb = &adj[flat];
        if nb.is_empty() {
            return false;
        }
        let nb_mean =
            nb.iter().map(|&j| deg[j as usize] as f64).sum::<f64>() / nb.len() as f64;
        let layer_mean = deg.iter().map(|&d| d as f64).sum::<f64>() / deg.len() as f64;
        nb_mean > layer_mean
    }
}
