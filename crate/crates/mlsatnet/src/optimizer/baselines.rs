//! Baseline deployment strategies used for comparison.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    Assignment, AssignmentConstraints, ConstraintTracker, OptimizerError, TwoLayerContext,
};

fn check_slot(ctx: &TwoLayerContext, slot: usize) -> Result<(), OptimizerError> {
    if slot >= ctx.n_slots() {
        return Err(OptimizerError::SlotOutOfRange {
            slot,
            n_slots: ctx.n_slots(),
        });
    }
    Ok(())
}

/// Picks admissible pairs in order of a sort key until k disjoint links
/// are placed.
fn pick_sorted(
    ctx: &TwoLayerContext,
    mut pool: Vec<usize>,
    sort_key: impl Fn(usize) -> (f64, usize, usize),
    descending: bool,
    k: usize,
    constraints: AssignmentConstraints,
) -> Result<Assignment, OptimizerError> {
    pool.sort_by(|&x, &y| {
        let (kx, ax, bx) = sort_key(x);
        let (ky, ay, by) = sort_key(y);
        let ord = if descending {
            ky.total_cmp(&kx)
        } else {
            kx.total_cmp(&ky)
        };
        ord.then(ax.cmp(&ay)).then(bx.cmp(&by))
    });
    let mut tracker = ConstraintTracker::new(ctx, constraints);
    let mut chosen = Vec::with_capacity(k);
    for idx in pool {
        if chosen.len() == k {
            break;
        }
        if tracker.admits(ctx, idx) {
            tracker.push(ctx, idx);
            chosen.push(idx);
        }
    }
    if chosen.len() < k {
        return Err(OptimizerError::InfeasibleK {
            needed: k,
            available: chosen.len(),
        });
    }
    Ok(ctx.assignment_from_indices(&chosen))
}

/// Deploys the k shortest admissible links, greedily and disjointly.
///
/// Ties on distance break on endpoint indices, so the result is fully
/// deterministic.
pub fn greedy_shortest(
    ctx: &TwoLayerContext,
    k: usize,
    slot: usize,
    constraints: AssignmentConstraints,
) -> Result<Assignment, OptimizerError> {
    if k == 0 {
        return Err(OptimizerError::KZero);
    }
    check_slot(ctx, slot)?;
    let pool = ctx.candidates.admissible_at(slot);
    pick_sorted(
        ctx,
        pool,
        |i| {
            let c = &ctx.candidates.candidates[i];
            (c.distance_km[slot], c.a_flat, c.b_flat)
        },
        false,
        k,
        constraints,
    )
}

/// Deploys the k admissible links of highest persistence weight,
/// greedily and disjointly.
pub fn max_time_weight(
    ctx: &TwoLayerContext,
    k: usize,
    slot: usize,
    constraints: AssignmentConstraints,
) -> Result<Assignment, OptimizerError> {
    if k == 0 {
        return Err(OptimizerError::KZero);
    }
    check_slot(ctx, slot)?;
    let pool = ctx.candidates.admissible_at(slot);
    pick_sorted(
        ctx,
        pool,
        |i| {
            let c = &ctx.candidates.candidates[i];
            (c.weight[slot], c.a_flat, c.b_flat)
        },
        true,
        k,
        constraints,
    )
}

/// Deploys k admissible links drawn at random, stratified over the
/// upper layer's orbit planes so no plane is favored.
///
/// Planes are visited round-robin in a shuffled order; each visit draws
/// one admissible, still-disjoint pair uniformly from that plane's
/// remaining pool. Fully reproducible from the seed.
pub fn random_uniform(
    ctx: &TwoLayerContext,
    k: usize,
    slot: usize,
    seed: u64,
    constraints: AssignmentConstraints,
) -> Result<Assignment, OptimizerError> {
    if k == 0 {
        return Err(OptimizerError::KZero);
    }
    check_slot(ctx, slot)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planes = ctx.eph_a.spec.planes;
    let mut per_plane: Vec<Vec<usize>> = vec![Vec::new(); planes];
    for idx in ctx.candidates.admissible_at(slot) {
        per_plane[ctx.candidates.candidates[idx].a.plane].push(idx);
    }
    for pool in &mut per_plane {
        pool.shuffle(&mut rng);
    }
    let mut order: Vec<usize> = (0..planes).collect();
    order.shuffle(&mut rng);

    let mut tracker = ConstraintTracker::new(ctx, constraints);
    let mut chosen = Vec::with_capacity(k);
    loop {
        let mut progressed = false;
        for &p in &order {
            if chosen.len() == k {
                break;
            }
            // Pools are pre-shuffled, so popping admissible entries off
            // the end is a uniform draw without replacement.
            while let Some(idx) = per_plane[p].pop() {
                if tracker.admits(ctx, idx) {
                    tracker.push(ctx, idx);
                    chosen.push(idx);
                    progressed = true;
                    break;
                }
            }
        }
        if chosen.len() == k || !progressed {
            break;
        }
    }
    if chosen.len() < k {
        return Err(OptimizerError::InfeasibleK {
            needed: k,
            available: chosen.len(),
        });
    }
    Ok(ctx.assignment_from_indices(&chosen))
}
