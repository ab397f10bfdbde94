//! Evolutionary deployment search exploiting the half-shell symmetry
//! of a circular constellation.
//!
//! A genome encodes only the links placed on one hemisphere; the other
//! hemisphere is completed by mirroring each link half the planes and
//! half the in-plane slots away, which halves the search space while
//! preserving the balanced coverage the shortest-path objective
//! rewards. Mirrors that fall outside the screened candidate pool are
//! repaired by redrawing. Children are adopted only when they beat the
//! member they were cloned from, and the search stops after a run of
//! generations without improvement.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    Assignment, AssignmentConstraints, ConstraintTracker, OptimizerError, TwoLayerContext,
};

/// How a full assignment is scored during the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitnessMode {
    /// Exact breadth-first mean path length of the stacked graph.
    /// Default: it distinguishes placements that the closed-form model,
    /// which sees only degree moments, scores identically.
    MeasuredBfs,
    /// Closed-form path-length model on post-deployment degree moments.
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    /// Surviving population size.
    pub population: usize,
    /// Clones produced per generation.
    pub clones: usize,
    /// Probability a clone is produced by crossover; otherwise the
    /// endpoints of its parent's genome are re-paired at random.
    pub crossover_prob: f64,
    /// Stop after this many consecutive generations without
    /// improvement of the best member. Zero disables evolution and
    /// returns the initial random population unchanged.
    pub max_stagnant_iters: usize,
    /// Hard ceiling on generations regardless of progress.
    pub generation_cap: usize,
    /// Single-link hill-climb attempts applied to the final best.
    pub polish_swaps: usize,
    pub rng_seed: u64,
    pub fitness: FitnessMode,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 20,
            clones: 40,
            crossover_prob: 0.8,
            max_stagnant_iters: 50,
            generation_cap: 400,
            polish_swaps: 64,
            rng_seed: 0,
            fitness: FitnessMode::MeasuredBfs,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    pub crossovers: u64,
    pub mutations: u64,
    /// Redraws forced by duplicate, inadmissible, or missing-mirror links.
    pub repairs: u64,
    /// Degree-aware delete-and-replace moves applied to clones.
    pub replacements: u64,
    pub accepted_children: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStat {
    pub generation: usize,
    pub best_apl: f64,
    pub stagnant: usize,
}

#[derive(Debug, Clone)]
pub struct OtlcResult {
    pub best: Assignment,
    pub best_apl: f64,
    /// Final population with fitness, best first.
    pub population: Vec<(Assignment, f64)>,
    pub counters: OpCounters,
    pub trace: Vec<GenerationStat>,
    pub generations: usize,
    /// False when the hemisphere pool was too thin and the genome drew
    /// from the whole candidate set instead.
    pub used_half_space: bool,
}

#[derive(Clone)]
struct Member {
    /// Hereditary material: candidate indices on the primary hemisphere.
    half: Vec<usize>,
    /// Phenotype: the completed disjoint assignment of size k.
    full: Vec<usize>,
    fitness: f64,
}

/// Uniform draw of a still-placeable candidate from a pool.
fn draw_from(
    ctx: &TwoLayerContext,
    pool: &[usize],
    tracker: &ConstraintTracker,
    rng: &mut ChaCha8Rng,
) -> Option<usize> {
    let open: Vec<usize> = pool
        .iter()
        .copied()
        .filter(|&i| tracker.admits(ctx, i))
        .collect();
    if open.is_empty() {
        None
    } else {
        Some(open[rng.gen_range(0..open.len())])
    }
}

/// Splitmix-style mix so every (generation, clone) pair gets an
/// independent, reproducible stream.
fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Engine<'a> {
    ctx: &'a TwoLayerContext,
    cfg: GaConfig,
    k: usize,
    h: usize,
    slot: usize,
    constraints: AssignmentConstraints,
    half_pool: Vec<usize>,
    full_pool: Vec<usize>,
    used_half_space: bool,
    counters: OpCounters,
}

impl Engine<'_> {
    fn new(
        ctx: &TwoLayerContext,
        cfg: GaConfig,
        k: usize,
        slot: usize,
        constraints: AssignmentConstraints,
    ) -> Engine<'_> {
        let full_pool = ctx.candidates.admissible_at(slot);
        // Classify each candidate by the sign of its midpoint longitude
        // at the snapshot, then search the better-populated hemisphere.
        let mut east = Vec::new();
        let mut west = Vec::new();
        for &i in &full_pool {
            let c = &ctx.candidates.candidates[i];
            let pa = ctx.eph_a.state(c.a_flat, slot).position_km;
            let pb = ctx.eph_b.state(c.b_flat, slot).position_km;
            let lon = (pa[1] + pb[1]).atan2(pa[0] + pb[0]);
            if lon >= 0.0 {
                east.push(i);
            } else {
                west.push(i);
            }
        }
        let half_pool = if east.len() >= west.len() { east } else { west };
        let h = k.div_ceil(2);
        // A thin hemisphere cannot seat the primary half; fall back to
        // drawing the genome from the whole admissible pool.
        let used_half_space = half_pool.len() >= h;
        let half_pool = if used_half_space {
            half_pool
        } else {
            full_pool.clone()
        };
        Engine {
            ctx,
            cfg,
            k,
            h,
            slot,
            constraints,
            half_pool,
            full_pool,
            used_half_space,
            counters: OpCounters::default(),
        }
    }

    /// Builds a feasible member from a desired genome, repairing
    /// conflicts and completing the second hemisphere by mirroring.
    /// `usize::MAX` entries in the genome force a redraw.
    fn build_member(&mut self, desired: &[usize], rng: &mut ChaCha8Rng) -> Option<Member> {
        let mut tracker = ConstraintTracker::new(self.ctx, self.constraints);
        let mut half = Vec::with_capacity(self.h);
        for &want in desired.iter().take(self.h) {
            let ok = want != usize::MAX
                && self.ctx.candidates.candidates[want].admissible[self.slot]
                && tracker.admits(self.ctx, want);
            let idx = if ok {
                want
            } else {
                self.counters.repairs += 1;
                draw_from(self.ctx, &self.half_pool, &tracker, rng)
                    .or_else(|| draw_from(self.ctx, &self.full_pool, &tracker, rng))?
            };
            tracker.push(self.ctx, idx);
            half.push(idx);
        }
        while half.len() < self.h {
            let idx = draw_from(self.ctx, &self.half_pool, &tracker, rng)
                .or_else(|| draw_from(self.ctx, &self.full_pool, &tracker, rng))?;
            tracker.push(self.ctx, idx);
            half.push(idx);
        }
        let mut full = half.clone();
        for &idx in &half {
            if full.len() == self.k {
                break;
            }
            let c = &self.ctx.candidates.candidates[idx];
            let mirrored = self
                .ctx
                .find_pair(self.ctx.mirror_id(c.a), self.ctx.mirror_id(c.b))
                .filter(|&m| {
                    self.ctx.candidates.candidates[m].admissible[self.slot]
                        && tracker.admits(self.ctx, m)
                });
            let pick = match mirrored {
                Some(m) => m,
                None => {
                    self.counters.repairs += 1;
                    draw_from(self.ctx, &self.full_pool, &tracker, rng)?
                }
            };
            tracker.push(self.ctx, pick);
            full.push(pick);
        }
        while full.len() < self.k {
            let idx = draw_from(self.ctx, &self.full_pool, &tracker, rng)?;
            tracker.push(self.ctx, idx);
            full.push(idx);
        }
        Some(Member {
            half,
            full,
            fitness: f64::NAN,
        })
    }

    /// Removes one link, preferring endpoints that are not hubs, and
    /// replaces it with a random admissible alternative.
    fn degree_swap(&mut self, member: &mut Member, rng: &mut ChaCha8Rng) {
        let (deg_a, deg_b) = self.ctx.supra_degrees(&member.full);
        let removable: Vec<usize> = (0..member.full.len())
            .filter(|&p| {
                let c = &self.ctx.candidates.candidates[member.full[p]];
                !(self.ctx.is_hub(true, c.a_flat, &deg_a, &deg_b)
                    || self.ctx.is_hub(false, c.b_flat, &deg_a, &deg_b))
            })
            .collect();
        let pos = if removable.is_empty() {
            rng.gen_range(0..member.full.len())
        } else {
            removable[rng.gen_range(0..removable.len())]
        };
        let mut tracker = ConstraintTracker::new(self.ctx, self.constraints);
        for &i in &member.full {
            tracker.push(self.ctx, i);
        }
        let old = member.full[pos];
        tracker.remove(self.ctx, old);
        if let Some(idx) = draw_from(self.ctx, &self.full_pool, &tracker, rng) {
            member.full[pos] = idx;
            self.counters.replacements += 1;
        } else {
            member.full[pos] = old;
        }
    }

    fn score_all(&self, members: &mut [Member]) -> Result<(), OptimizerError> {
        let fits: Result<Vec<f64>, OptimizerError> = members
            .par_iter()
            .map(|m| {
                let pairs = self.ctx.assignment_from_indices(&m.full).pairs;
                match self.cfg.fitness {
                    FitnessMode::MeasuredBfs => Ok(self.ctx.measured_apl(&pairs)?.apl),
                    FitnessMode::Analytic => self.ctx.analytic_apl(&pairs),
                }
            })
            .collect();
        for (m, f) in members.iter_mut().zip(fits?) {
            m.fitness = f;
        }
        Ok(())
    }
}

fn sort_key(m: &Member) -> (f64, Vec<usize>) {
    let mut full = m.full.clone();
    full.sort_unstable();
    (m.fitness, full)
}

/// Runs the hemisphere-mirrored evolutionary search for a k-link
/// deployment at one slot.
pub fn otlc(
    ctx: &TwoLayerContext,
    cfg: GaConfig,
    k: usize,
    slot: usize,
    constraints: AssignmentConstraints,
) -> Result<OtlcResult, OptimizerError> {
    if k == 0 {
        return Err(OptimizerError::KZero);
    }
    if slot >= ctx.n_slots() {
        return Err(OptimizerError::SlotOutOfRange {
            slot,
            n_slots: ctx.n_slots(),
        });
    }
    let mut engine = Engine::new(ctx, cfg, k, slot, constraints);

    // Initial random population; a handful of retries absorbs unlucky
    // draws before the instance is declared infeasible.
    let mut population: Vec<Member> = Vec::with_capacity(cfg.population);
    for s in 0..cfg.population {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, 0, s as u64));
        let mut built = None;
        for _ in 0..20 {
            if let Some(m) = engine.build_member(&[], &mut rng) {
                built = Some(m);
                break;
            }
        }
        if let Some(m) = built {
            population.push(m);
        }
    }
    if population.is_empty() {
        return Err(OptimizerError::InfeasibleK {
            needed: k,
            available: 0,
        });
    }
    engine.score_all(&mut population)?;
    population.sort_by(|a, b| {
        let (fa, ka) = sort_key(a);
        let (fb, kb) = sort_key(b);
        fa.total_cmp(&fb).then(ka.cmp(&kb))
    });

    let mut best = population[0].clone();
    let mut trace = Vec::new();
    let mut stagnant = 0usize;
    let mut generation = 0usize;

    while stagnant < cfg.max_stagnant_iters && generation < cfg.generation_cap {
        generation += 1;
        let mut children: Vec<(usize, Member)> = Vec::with_capacity(cfg.clones);
        for c in 0..cfg.clones {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, generation as u64, c as u64));
            let parent_at = c % population.len();
            let desired: Vec<usize> = if rng.gen::<f64>() < cfg.crossover_prob {
                engine.counters.crossovers += 1;
                let partner = &population[rng.gen_range(0..population.len())];
                let cut = rng.gen_range(0..=engine.h);
                partner.half[..cut.min(partner.half.len())]
                    .iter()
                    .chain(population[parent_at].half[cut.min(population[parent_at].half.len())..].iter())
                    .copied()
                    .collect()
            } else {
                // Mutation re-pairs the genome's endpoints: upper
                // satellites keep their order, lower satellites are
                // shuffled among them. Pairs that were never screened
                // in force a repair draw.
                engine.counters.mutations += 1;
                let parent = &population[parent_at];
                let a_side: Vec<_> = parent
                    .half
                    .iter()
                    .map(|&i| ctx.candidates.candidates[i].a)
                    .collect();
                let mut b_side: Vec<_> = parent
                    .half
                    .iter()
                    .map(|&i| ctx.candidates.candidates[i].b)
                    .collect();
                b_side.shuffle(&mut rng);
                a_side
                    .iter()
                    .zip(b_side.iter())
                    .map(|(&a, &b)| ctx.find_pair(a, b).unwrap_or(usize::MAX))
                    .collect()
            };
            let Some(mut child) = engine.build_member(&desired, &mut rng) else {
                continue;
            };
            engine.degree_swap(&mut child, &mut rng);
            children.push((parent_at, child));
        }
        let mut members: Vec<Member> = children.iter().map(|(_, m)| m.clone()).collect();
        engine.score_all(&mut members)?;
        // A clone joins the pool only if it improves on the member it
        // was cloned from.
        let mut accepted: Vec<Member> = Vec::new();
        for ((parent_at, _), child) in children.into_iter().zip(members) {
            if child.fitness < population[parent_at].fitness {
                engine.counters.accepted_children += 1;
                accepted.push(child);
            }
        }
        population.extend(accepted);
        population.sort_by(|a, b| {
            let (fa, ka) = sort_key(a);
            let (fb, kb) = sort_key(b);
            fa.total_cmp(&fb).then(ka.cmp(&kb))
        });
        population.truncate(cfg.population);
        if population[0].fitness < best.fitness - 1e-12 {
            best = population[0].clone();
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        trace.push(GenerationStat {
            generation,
            best_apl: best.fitness,
            stagnant,
        });
    }

    // Final polish: random single-link replacements on the full
    // assignment, kept only when they strictly improve.
    if cfg.max_stagnant_iters > 0 && cfg.polish_swaps > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, u64::MAX, 0));
        for _ in 0..cfg.polish_swaps {
            let mut trial = best.clone();
            engine.degree_swap(&mut trial, &mut rng);
            let mut one = vec![trial];
            engine.score_all(&mut one)?;
            let trial = one.pop().unwrap();
            if trial.fitness < best.fitness - 1e-12 {
                best = trial;
            }
        }
    }

    let population_out = population
        .iter()
        .map(|m| (ctx.assignment_from_indices(&m.full), m.fitness))
        .collect();
    Ok(OtlcResult {
        best: ctx.assignment_from_indices(&best.full),
        best_apl: best.fitness,
        population: population_out,
        counters: engine.counters,
        trace,
        generations: generation,
        used_half_space: engine.used_half_space,
    })
}
