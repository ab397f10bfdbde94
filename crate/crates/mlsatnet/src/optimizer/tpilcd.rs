//! Full deployment pipeline: evolutionary snapshot placement followed
//! by a churn-minimizing per-slot schedule.
//!
//! The snapshot assignment is optimized once, at the deployment slot.
//! After that the schedule applies hysteresis: a deployed link is kept
//! as long as it stays physically feasible, with the admissibility
//! window applying only to newly deployed links. When links break, the
//! freed terminals on both layers are re-paired by maximum-weight
//! matching on the persistence weights, so replacement links are the
//! ones expected to survive longest; terminals that cannot be re-paired
//! are given fresh links from the candidate pool, and only when that
//! fails does the deployment shrink.

use serde::{Deserialize, Serialize};

use super::hungarian::mtwm;
use super::otlc::{otlc, GaConfig, OtlcResult};
use super::{
    Assignment, AssignmentConstraints, ConstraintTracker, OptimizerError, Schedule,
    TwoLayerContext,
};
use crate::topology::AplResult;

/// Per-slot maintenance summary of the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotDiag {
    pub slot: usize,
    /// Links carried over from the previous slot.
    pub kept: usize,
    /// Broken links whose freed terminals were re-paired by matching.
    pub rematched: usize,
    /// Fresh links drawn from the admissible pool.
    pub replaced: usize,
    /// Shortfall against the requested k at this slot.
    pub dropped: usize,
}

#[derive(Debug, Clone)]
pub struct TpilcdOutcome {
    /// One assignment per grid slot; slots before the deployment slot
    /// are empty.
    pub schedule: Schedule,
    /// The optimized assignment at the deployment slot.
    pub snapshot: Assignment,
    pub snapshot_apl: AplResult,
    /// Search diagnostics; absent when k = 0.
    pub otlc: Option<OtlcResult>,
    pub slot_diags: Vec<SlotDiag>,
}

/// Highest-weight admissible candidate whose endpoints are free,
/// ties broken toward the lowest index for determinism.
fn best_fresh(
    ctx: &TwoLayerContext,
    slot: usize,
    tracker: &ConstraintTracker,
) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for i in 0..ctx.candidates.candidates.len() {
        let c = &ctx.candidates.candidates[i];
        if !c.admissible[slot] || !tracker.admits(ctx, i) {
            continue;
        }
        let w = c.weight[slot];
        if best.map_or(true, |(bw, _)| w > bw) {
            best = Some((w, i));
        }
    }
    best.map(|(_, i)| i)
}

/// Carries an initial assignment across the horizon with hysteresis:
/// keep links while physically alive, re-pair broken terminals by
/// maximum-weight matching, then top up from the admissible pool.
///
/// This is the maintenance phase shared by the full pipeline and by
/// simpler variants that seed it with a baseline snapshot. Every pair
/// of the initial assignment must come from the screened candidate
/// set of `ctx`.
pub fn schedule_with_hysteresis(
    ctx: &TwoLayerContext,
    initial: &Assignment,
    constraints: AssignmentConstraints,
    snapshot_slot: usize,
) -> Result<(Schedule, Vec<SlotDiag>), OptimizerError> {
    let n_slots = ctx.n_slots();
    if snapshot_slot >= n_slots {
        return Err(OptimizerError::SlotOutOfRange {
            slot: snapshot_slot,
            n_slots,
        });
    }
    let k = initial.len();
    let snapshot_indices: Vec<usize> = initial
        .pairs
        .iter()
        .map(|&(a, b)| ctx.find_pair(a, b).expect("snapshot pair was screened"))
        .collect();

    let mut per_slot = vec![Assignment::empty(); n_slots];
    let mut slot_diags: Vec<SlotDiag> = (0..snapshot_slot)
        .map(|slot| SlotDiag {
            slot,
            kept: 0,
            rematched: 0,
            replaced: 0,
            dropped: k,
        })
        .collect();

    let mut current: Vec<usize> = Vec::new();
    for t in snapshot_slot..n_slots {
        let (kept, rematched, replaced) = if t == snapshot_slot {
            current = snapshot_indices.clone();
            (current.len(), 0, 0)
        } else {
            let kept: Vec<usize> = current
                .iter()
                .copied()
                .filter(|&i| ctx.candidates.candidates[i].physical[t])
                .collect();
            let broken: Vec<usize> = current
                .iter()
                .copied()
                .filter(|&i| !ctx.candidates.candidates[i].physical[t])
                .collect();
            let mut tracker = ConstraintTracker::new(ctx, constraints);
            for &i in &kept {
                tracker.push(ctx, i);
            }
            current = kept.clone();
            let mut rematched = 0usize;
            if !broken.is_empty() {
                // Re-pair the freed terminals by maximum total weight.
                // Infeasible or vanished pairs weigh zero; any physical
                // link has strictly positive weight, so harvesting the
                // positive matches yields the best partial re-pairing.
                let m = broken.len();
                let freed_a: Vec<usize> = broken
                    .iter()
                    .map(|&i| ctx.candidates.candidates[i].a_flat)
                    .collect();
                let freed_b: Vec<usize> = broken
                    .iter()
                    .map(|&i| ctx.candidates.candidates[i].b_flat)
                    .collect();
                let weights: Vec<Vec<f64>> = (0..m)
                    .map(|i| {
                        (0..m)
                            .map(|j| {
                                ctx.candidates
                                    .find(freed_a[i], freed_b[j])
                                    .filter(|&ci| ctx.candidates.candidates[ci].physical[t])
                                    .map_or(0.0, |ci| ctx.candidates.candidates[ci].weight[t])
                            })
                            .collect()
                    })
                    .collect();
                let matching = mtwm(&weights)?;
                for (i, &j) in matching.match_of_row.iter().enumerate() {
                    if weights[i][j] > 0.0 {
                        let ci = ctx.candidates.find(freed_a[i], freed_b[j]).unwrap();
                        tracker.push(ctx, ci);
                        current.push(ci);
                        rematched += 1;
                    }
                }
            }
            let mut replaced = 0usize;
            while current.len() < k {
                let Some(idx) = best_fresh(ctx, t, &tracker) else {
                    break;
                };
                tracker.push(ctx, idx);
                current.push(idx);
                replaced += 1;
            }
            (kept.len(), rematched, replaced)
        };
        slot_diags.push(SlotDiag {
            slot: t,
            kept,
            rematched,
            replaced,
            dropped: k - current.len(),
        });
        per_slot[t] = ctx.assignment_from_indices(&current);
    }

    Ok((Schedule { per_slot }, slot_diags))
}

/// Optimizes a snapshot deployment and schedules it over the horizon.
pub fn tpilcd(
    ctx: &TwoLayerContext,
    k: usize,
    ga: GaConfig,
    constraints: AssignmentConstraints,
    snapshot_slot: usize,
) -> Result<TpilcdOutcome, OptimizerError> {
    let n_slots = ctx.n_slots();
    if snapshot_slot >= n_slots {
        return Err(OptimizerError::SlotOutOfRange {
            slot: snapshot_slot,
            n_slots,
        });
    }
    if k == 0 {
        let empty = Assignment::empty();
        return Ok(TpilcdOutcome {
            schedule: Schedule {
                per_slot: vec![empty.clone(); n_slots],
            },
            snapshot_apl: ctx.measured_apl(&empty.pairs)?,
            snapshot: empty,
            otlc: None,
            slot_diags: (0..n_slots)
                .map(|slot| SlotDiag {
                    slot,
                    kept: 0,
                    rematched: 0,
                    replaced: 0,
                    dropped: 0,
                })
                .collect(),
        });
    }

    let search = otlc(ctx, ga, k, snapshot_slot, constraints)?;
    let snapshot = search.best.clone();
    let snapshot_apl = ctx.measured_apl(&snapshot.pairs)?;
    let (schedule, slot_diags) =
        schedule_with_hysteresis(ctx, &snapshot, constraints, snapshot_slot)?;
    Ok(TpilcdOutcome {
        schedule,
        snapshot,
        snapshot_apl,
        otlc: Some(search),
        slot_diags,
    })
}
