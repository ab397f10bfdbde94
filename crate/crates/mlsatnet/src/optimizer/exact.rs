//! Exhaustive search over disjoint k-subsets of admissible candidates.
//!
//! Ground truth for small instances: every endpoint-disjoint set of k
//! admissible pairs is scored by exact breadth-first path measurement,
//! and the best is returned. A budget on the number of complete
//! matchings scored keeps accidental combinatorial blow-ups from
//! hanging a run; exceeding it is an error that points at the
//! heuristic strategies instead.

use super::{
    Assignment, AssignmentConstraints, ConstraintTracker, OptimizerError, TwoLayerContext,
};
use crate::topology::AplResult;

/// Default cap on scored matchings for [`exact_min_apl`].
pub const DEFAULT_EXACT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone)]
pub struct ExactResult {
    pub assignment: Assignment,
    pub apl: AplResult,
    /// Deployment objective: links deployed times mean path length.
    pub objective: f64,
    /// Complete matchings scored before returning.
    pub enumerated: u64,
}

struct Search<'a> {
    ctx: &'a TwoLayerContext,
    pool: Vec<usize>,
    k: usize,
    budget: u64,
    enumerated: u64,
    best_apl: f64,
    best: Option<Vec<usize>>,
    current: Vec<usize>,
}

impl Search<'_> {
    fn run(
        &mut self,
        start: usize,
        tracker: &mut ConstraintTracker,
    ) -> Result<(), OptimizerError> {
        if self.current.len() == self.k {
            if self.enumerated >= self.budget {
                return Err(OptimizerError::BudgetExceeded {
                    budget: self.budget,
                });
            }
            self.enumerated += 1;
            let assignment = self.ctx.assignment_from_indices(&self.current);
            let apl = self.ctx.measured_apl(&assignment.pairs)?.apl;
            // Strict improvement only: with the pool scanned in sorted
            // order, ties resolve to the lexicographically smallest
            // index set, making the result deterministic.
            if apl < self.best_apl {
                self.best_apl = apl;
                self.best = Some(self.current.clone());
            }
            return Ok(());
        }
        let needed = self.k - self.current.len();
        for pos in start..self.pool.len() {
            if self.pool.len() - pos < needed {
                break;
            }
            let idx = self.pool[pos];
            if !tracker.admits(self.ctx, idx) {
                continue;
            }
            tracker.push(self.ctx, idx);
            self.current.push(idx);
            self.run(pos + 1, tracker)?;
            self.current.pop();
            tracker.remove(self.ctx, idx);
        }
        Ok(())
    }
}

/// Finds the globally best k-link deployment at one slot by exhaustive
/// enumeration, scoring each complete matching exactly.
pub fn exact_min_apl(
    ctx: &TwoLayerContext,
    k: usize,
    slot: usize,
    constraints: AssignmentConstraints,
    budget: u64,
) -> Result<ExactResult, OptimizerError> {
    if k == 0 {
        return Err(OptimizerError::KZero);
    }
    if slot >= ctx.n_slots() {
        return Err(OptimizerError::SlotOutOfRange {
            slot,
            n_slots: ctx.n_slots(),
        });
    }
    let pool = ctx.candidates.admissible_at(slot);
    let mut search = Search {
        ctx,
        pool,
        k,
        budget,
        enumerated: 0,
        best_apl: f64::INFINITY,
        best: None,
        current: Vec::with_capacity(k),
    };
    let mut tracker = ConstraintTracker::new(ctx, constraints);
    search.run(0, &mut tracker)?;
    let Some(best) = search.best else {
        return Err(OptimizerError::InfeasibleK {
            needed: k,
            available: 0,
        });
    };
    let assignment = ctx.assignment_from_indices(&best);
    let apl = ctx.measured_apl(&assignment.pairs)?;
    let objective = k as f64 * apl.apl;
    Ok(ExactResult {
        assignment,
        apl,
        objective,
        enumerated: search.enumerated,
    })
}
