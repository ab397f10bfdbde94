//! Network-level metrics for a deployed stack: throughput proxies,
//! concurrent-flow bottleneck, handover churn, and deployment cost.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::aplmodel::{deployment_cost, monolayer_apl, AplError, LayerMoments};
use crate::constellation::SatelliteId;
use crate::linkmodel::{chord_km, link_rate, LinkError, RateParams};
use crate::optimizer::{Assignment, OptimizerError, Schedule, TwoLayerContext};
use crate::topology::{assemble_supra, bfs_apl, SupraAdjacency, TopologyError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("slot {slot} outside horizon of {n_slots} slots")]
    SlotOutOfRange { slot: usize, n_slots: usize },
    #[error("demand endpoint {0:?} is not part of the stack")]
    UnknownEndpoint(SatelliteId),
    #[error("demand volume must be positive, got {0}")]
    NonPositiveVolume(f64),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Apl(#[from] AplError),
    #[error(transparent)]
    Optimizer(#[from] Box<OptimizerError>),
}

impl From<OptimizerError> for EvalError {
    fn from(e: OptimizerError) -> Self {
        EvalError::Optimizer(Box::new(e))
    }
}

fn check_slot(ctx: &TwoLayerContext, slot: usize) -> Result<(), EvalError> {
    if slot >= ctx.n_slots() {
        return Err(EvalError::SlotOutOfRange {
            slot,
            n_slots: ctx.n_slots(),
        });
    }
    Ok(())
}

/// Sum of Shannon rates over the intra-layer links of one layer.
fn intra_rate_sum(
    eph: &crate::constellation::Ephemeris,
    topo: &crate::topology::LayerTopology,
    slot: usize,
    params: &RateParams,
) -> Result<f64, EvalError> {
    let mut sum = 0.0;
    for &(u, v, _) in &topo.edges {
        let d = chord_km(eph.state(u as usize, slot), eph.state(v as usize, slot));
        sum += link_rate(params, d)?;
    }
    Ok(sum)
}

/// Capacity-over-distance summary of a deployment at one slot.
///
/// The proxy treats a network as a pool of link capacity diluted by the
/// mean number of hops a unit of traffic must take, then scales by the
/// fraction of the all-to-all demand the network can serve at all:
///
/// ```text
/// proxy = (rate sum / mean path length) * (reachable pairs / all pairs)
/// ```
///
/// Both sides of a comparison face the same demand universe — every
/// unordered satellite pair of the stack. Isolated layers serve none of
/// the cross-layer pairs, so their coverage factor is well below one;
/// that is what deploying inter-layer links buys. The baseline here is
/// the k = 0 configuration of the same stack, which is exactly the two
/// layers operating in isolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThroughputReport {
    pub layer_rate_bps: [f64; 2],
    pub ilc_rate_bps: f64,
    pub total_rate_bps: f64,
    pub layer_apl: [f64; 2],
    /// Mean path length of the stack over its reachable pairs.
    pub stack_apl: f64,
    /// Reachable fraction of all unordered pairs in the stack.
    pub coverage: f64,
    /// Deployed inter-layer rate over the stack mean path length; zero
    /// when nothing is deployed.
    pub cross_proxy_bps: f64,
    /// Coverage-weighted capacity per hop of this deployment.
    pub stacked_proxy_bps: f64,
    /// The same figure for the k = 0 stack (isolated layers).
    pub isolated_proxy_bps: f64,
    /// Relative improvement of the deployment over isolated layers.
    pub gain: f64,
}

/// Capacity pool diluted by mean path length, scaled by the fraction of
/// the all-to-all demand the graph can reach. The building block of
/// every throughput comparison here; exposed so wider stacks can apply
/// the same figure of merit.
pub fn coverage_weighted_proxy(rate_bps: f64, apl: &crate::topology::AplResult) -> f64 {
    let all_pairs = (apl.reachable_pairs + apl.unreachable_pairs) as f64;
    rate_bps / apl.apl * (apl.reachable_pairs as f64 / all_pairs)
}

pub fn throughput_proxy(
    ctx: &TwoLayerContext,
    assignment: &Assignment,
    slot: usize,
    params: &RateParams,
) -> Result<ThroughputReport, EvalError> {
    check_slot(ctx, slot)?;
    let rate_a = intra_rate_sum(&ctx.eph_a, &ctx.topo_a, slot, params)?;
    let rate_b = intra_rate_sum(&ctx.eph_b, &ctx.topo_b, slot, params)?;
    let spp_a = ctx.eph_a.spec.sats_per_plane;
    let spp_b = ctx.eph_b.spec.sats_per_plane;
    let mut ilc_rate = 0.0;
    for &(x, y) in &assignment.pairs {
        let d = chord_km(
            ctx.eph_a.state(x.flat(spp_a), slot),
            ctx.eph_b.state(y.flat(spp_b), slot),
        );
        ilc_rate += link_rate(params, d)?;
    }
    let apl_a = bfs_apl(&assemble_supra(&[&ctx.topo_a], &[])?).apl;
    let apl_b = bfs_apl(&assemble_supra(&[&ctx.topo_b], &[])?).apl;
    let stack = bfs_apl(&ctx.supra_with(&assignment.pairs)?);
    let baseline = bfs_apl(&ctx.supra_with(&[])?);
    let total = rate_a + rate_b + ilc_rate;
    let all_pairs = (stack.reachable_pairs + stack.unreachable_pairs) as f64;
    let stacked = coverage_weighted_proxy(total, &stack);
    let isolated = coverage_weighted_proxy(rate_a + rate_b, &baseline);
    Ok(ThroughputReport {
        layer_rate_bps: [rate_a, rate_b],
        ilc_rate_bps: ilc_rate,
        total_rate_bps: total,
        layer_apl: [apl_a, apl_b],
        stack_apl: stack.apl,
        coverage: stack.reachable_pairs as f64 / all_pairs,
        cross_proxy_bps: ilc_rate / stack.apl,
        stacked_proxy_bps: stacked,
        isolated_proxy_bps: isolated,
        gain: stacked / isolated - 1.0,
    })
}

/// Link churn over a schedule, counted per terminal.
///
/// Tearing a link down re-targets both of its terminals, as does
/// establishing one, so a broken pair costs 2, a formed pair costs 2,
/// and replacing one pair with another costs 4. The deployment state at
/// slot 0 is the starting condition, not churn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HandoverReport {
    /// Terminal re-targets over the whole schedule.
    pub total: u64,
    /// Pairs torn down across all transitions.
    pub break_events: u64,
    /// Pairs established across all transitions.
    pub formation_events: u64,
    /// Terminal re-targets in the transition into each slot; index 0 is
    /// always zero.
    pub per_slot: Vec<u64>,
    /// Re-targets per upper-layer plane.
    pub per_plane_a: BTreeMap<usize, u64>,
    /// Re-targets per lower-layer plane.
    pub per_plane_b: BTreeMap<usize, u64>,
}

pub fn handover_count(schedule: &Schedule) -> HandoverReport {
    let mut report = HandoverReport {
        total: 0,
        break_events: 0,
        formation_events: 0,
        per_slot: vec![0; schedule.per_slot.len()],
        per_plane_a: BTreeMap::new(),
        per_plane_b: BTreeMap::new(),
    };
    for t in 1..schedule.per_slot.len() {
        let prev: std::collections::BTreeSet<_> =
            schedule.per_slot[t - 1].pairs.iter().collect();
        let cur: std::collections::BTreeSet<_> = schedule.per_slot[t].pairs.iter().collect();
        for &&(a, b) in prev.difference(&cur).chain(cur.difference(&prev)) {
            report.total += 2;
            report.per_slot[t] += 2;
            *report.per_plane_a.entry(a.plane).or_insert(0) += 1;
            *report.per_plane_b.entry(b.plane).or_insert(0) += 1;
        }
        report.break_events += prev.difference(&cur).count() as u64;
        report.formation_events += cur.difference(&prev).count() as u64;
    }
    report
}

/// A source-destination demand between two satellites of the stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowDemand {
    pub src: SatelliteId,
    pub dst: SatelliteId,
    pub volume_bps: f64,
}

/// Concurrent-flow estimate: the largest common scale factor at which
/// every demand fits its fixed shortest-hop route.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowReport {
    /// Max uniform demand multiplier; `None` when no demand was routed.
    pub lambda: Option<f64>,
    /// Link attaining the minimum capacity-to-load ratio.
    pub bottleneck: Option<(SatelliteId, SatelliteId)>,
    pub total_demand_bps: f64,
    pub routed_flows: usize,
    /// Demands with no path, e.g. cross-layer pairs with no deployed
    /// inter-layer link.
    pub unreachable_flows: usize,
    /// Highest load-to-capacity ratio at unit scale.
    pub max_edge_utilization: f64,
}

fn node_of(
    ctx: &TwoLayerContext,
    supra: &SupraAdjacency,
    id: SatelliteId,
) -> Result<usize, EvalError> {
    let spp = if id.layer == ctx.eph_a.layer {
        ctx.eph_a.spec.sats_per_plane
    } else {
        ctx.eph_b.spec.sats_per_plane
    };
    supra.node(id, spp).ok_or(EvalError::UnknownEndpoint(id))
}

fn id_of(ctx: &TwoLayerContext, node: usize) -> SatelliteId {
    let na = ctx.eph_a.n_sats();
    if node < na {
        let spp = ctx.eph_a.spec.sats_per_plane;
        SatelliteId::new(ctx.eph_a.layer, node / spp, node % spp)
    } else {
        let flat = node - na;
        let spp = ctx.eph_b.spec.sats_per_plane;
        SatelliteId::new(ctx.eph_b.layer, flat / spp, flat % spp)
    }
}

fn edge_distance_km(ctx: &TwoLayerContext, u: usize, v: usize, slot: usize) -> f64 {
    let na = ctx.eph_a.n_sats();
    let state = |node: usize| {
        if node < na {
            ctx.eph_a.state(node, slot)
        } else {
            ctx.eph_b.state(node - na, slot)
        }
    };
    chord_km(state(u), state(v))
}

/// Routes every demand on its breadth-first shortest path (first-found
/// parent, so routes are deterministic), accumulates per-link load, and
/// reports the binding capacity ratio.
pub fn concurrent_flow_estimate(
    ctx: &TwoLayerContext,
    assignment: &Assignment,
    slot: usize,
    demands: &[FlowDemand],
    params: &RateParams,
) -> Result<FlowReport, EvalError> {
    check_slot(ctx, slot)?;
    let supra = ctx.supra_with(&assignment.pairs)?;
    let mut parents: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut load: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut total_demand = 0.0;
    let mut routed = 0usize;
    let mut unreachable = 0usize;

    for d in demands {
        if !(d.volume_bps > 0.0) {
            return Err(EvalError::NonPositiveVolume(d.volume_bps));
        }
        let src = node_of(ctx, &supra, d.src)?;
        let dst = node_of(ctx, &supra, d.dst)?;
        total_demand += d.volume_bps;
        if src == dst {
            routed += 1;
            continue;
        }
        let parent = parents.entry(src).or_insert_with(|| {
            let mut parent = vec![usize::MAX; supra.n];
            parent[src] = src;
            let mut queue = std::collections::VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                for &v in supra.neighbors(u) {
                    if parent[v as usize] == usize::MAX {
                        parent[v as usize] = u;
                        queue.push_back(v as usize);
                    }
                }
            }
            parent
        });
        if parent[dst] == usize::MAX {
            unreachable += 1;
            continue;
        }
        routed += 1;
        let mut v = dst;
        while v != src {
            let u = parent[v];
            let key = (u.min(v), u.max(v));
            *load.entry(key).or_insert(0.0) += d.volume_bps;
            v = u;
        }
    }

    let mut lambda: Option<f64> = None;
    let mut bottleneck = None;
    let mut max_util = 0.0f64;
    for (&(u, v), &l) in &load {
        let cap = link_rate(params, edge_distance_km(ctx, u, v, slot))?;
        let ratio = cap / l;
        max_util = max_util.max(l / cap);
        if lambda.map_or(true, |cur| ratio < cur) {
            lambda = Some(ratio);
            bottleneck = Some((id_of(ctx, u), id_of(ctx, v)));
        }
    }
    Ok(FlowReport {
        lambda,
        bottleneck,
        total_demand_bps: total_demand,
        routed_flows: routed,
        unreachable_flows: unreachable,
        max_edge_utilization: max_util,
    })
}

/// Closed-form deployment cost of k inter-layer links: network mean
/// distance, times per-link relay load of the larger layer, times k.
pub fn analytic_cost(ctx: &TwoLayerContext, k: usize) -> Result<f64, EvalError> {
    let (n_big, n_small) = (
        ctx.eph_a.n_sats().max(ctx.eph_b.n_sats()),
        ctx.eph_a.n_sats().min(ctx.eph_b.n_sats()),
    );
    // The closed-form stack model sees only degree moments, so any k
    // disjoint endpoint choices serve to evaluate the curve.
    let pairs: Vec<(SatelliteId, SatelliteId)> = (0..k)
        .map(|i| {
            let spp_a = ctx.eph_a.spec.sats_per_plane;
            let spp_b = ctx.eph_b.spec.sats_per_plane;
            (
                SatelliteId::new(ctx.eph_a.layer, i / spp_a, i % spp_a),
                SatelliteId::new(ctx.eph_b.layer, i / spp_b, i % spp_b),
            )
        })
        .collect();
    let apl = ctx.analytic_apl(&pairs)?;
    let deg_big = if ctx.eph_a.n_sats() >= ctx.eph_b.n_sats() {
        ctx.topo_a.degrees()
    } else {
        ctx.topo_b.degrees()
    };
    let n = deg_big.len() as f64;
    let h1 = deg_big.iter().map(|&d| d as f64).sum::<f64>() / n;
    let h2 = deg_big.iter().map(|&d| (d * d) as f64).sum::<f64>() / n - h1;
    let d_big = monolayer_apl(&LayerMoments::new(deg_big.len(), h1, h2))?;
    debug_assert!(n_big >= n_small);
    Ok(deployment_cost(apl, k, n_small, d_big)?)
}

/// One-stop metrics bundle for reporting a deployment.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub algorithm: String,
    pub k: usize,
    pub slot: usize,
    pub measured_apl: f64,
    pub reachable_pairs: u64,
    pub unreachable_pairs: u64,
    pub analytic_apl: f64,
    pub throughput: ThroughputReport,
    pub deployment_cost: f64,
    /// Present when a schedule was produced, not just a snapshot.
    pub handovers: Option<HandoverReport>,
}

pub fn metrics_report(
    ctx: &TwoLayerContext,
    algorithm: &str,
    assignment: &Assignment,
    schedule: Option<&Schedule>,
    slot: usize,
    params: &RateParams,
) -> Result<MetricsReport, EvalError> {
    check_slot(ctx, slot)?;
    let measured = ctx.measured_apl(&assignment.pairs)?;
    let analytic = ctx.analytic_apl(&assignment.pairs)?;
    let throughput = throughput_proxy(ctx, assignment, slot, params)?;
    let cost = if assignment.is_empty() {
        0.0
    } else {
        analytic_cost(ctx, assignment.len())?
    };
    Ok(MetricsReport {
        algorithm: algorithm.to_string(),
        k: assignment.len(),
        slot,
        measured_apl: measured.apl,
        reachable_pairs: measured.reachable_pairs,
        unreachable_pairs: measured.unreachable_pairs,
        analytic_apl: analytic,
        throughput,
        deployment_cost: cost,
        handovers: schedule.map(handover_count),
    })
}
