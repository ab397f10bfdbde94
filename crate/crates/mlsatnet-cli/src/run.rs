//! Scenario execution: optimize each interface down the stack, collect
//! metric series, and write the artifact files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use mlsatnet::aplmodel::{deployment_cost, monolayer_apl, LayerMoments};
use mlsatnet::constellation::{propagate_spec, Ephemeris, PhasingConvention, SatelliteId};
use mlsatnet::evaluation::{coverage_weighted_proxy, metrics_report, MetricsReport};
use mlsatnet::linkmodel::{chord_km, link_rate, RateParams};
use mlsatnet::optimizer::{
    exact_min_apl, greedy_shortest, max_time_weight, otlc, random_uniform,
    schedule_with_hysteresis, tpilcd, Assignment, OptimizerError, Schedule, TwoLayerContext,
    DEFAULT_EXACT_BUDGET,
};
use mlsatnet::topology::{assemble_supra, bfs_apl, build_gridplus, AplResult, LayerTopology, SeamMode};
use mlsatnet::traffic::{attach_and_route, generate_flows, AttachmentPolicy, SlotTrafficReport};

use crate::config::{Resolved, Scenario};
use crate::{svg, CliError};

/// Deployment strategies addressable from a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Algorithm {
    Tpilcd,
    Otlc,
    Greedy,
    Random,
    MaxTimeWeight,
    Exact,
}

impl FromStr for Algorithm {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "tpilcd" => Ok(Algorithm::Tpilcd),
            "otlc" => Ok(Algorithm::Otlc),
            "greedy" => Ok(Algorithm::Greedy),
            "random" => Ok(Algorithm::Random),
            "max-time-weight" | "mtw" => Ok(Algorithm::MaxTimeWeight),
            "exact" => Ok(Algorithm::Exact),
            other => Err(CliError::UnknownAlgorithm(other.to_string())),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Algorithm::Tpilcd => "tpilcd",
            Algorithm::Otlc => "otlc",
            Algorithm::Greedy => "greedy",
            Algorithm::Random => "random",
            Algorithm::MaxTimeWeight => "max-time-weight",
            Algorithm::Exact => "exact",
        };
        f.write_str(name)
    }
}

/// Splitmix-style stream derivation so every consumer of the master
/// seed gets an independent, reproducible stream.
fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_GA: u64 = 1;
const STREAM_RANDOM: u64 = 2;

fn stream(base: u64, kind: u64, iface: usize, k: usize, slot: usize) -> u64 {
    let salt =
        (kind << 56) ^ ((iface as u64) << 48) ^ ((k as u64) << 24) ^ slot as u64;
    derive_seed(base, salt)
}

struct InterfaceOutcome {
    snapshot: Assignment,
    schedule: Schedule,
    report: MetricsReport,
}

/// Runs one strategy on one interface: snapshot at the deployment slot
/// plus a full-horizon schedule. Snapshot-only strategies are carried
/// across the horizon with the shared hysteresis maintenance; greedy
/// and random re-deploy from scratch every slot, which is exactly what
/// makes them churn-heavy baselines.
fn run_interface(
    algo: Algorithm,
    ctx: &TwoLayerContext,
    k: usize,
    r: &Resolved,
    iface: usize,
) -> Result<InterfaceOutcome, CliError> {
    let slot = r.snapshot_slot;
    let constraints = r.constraints;
    let mut ga = r.ga;
    ga.rng_seed = stream(r.seed, STREAM_GA, iface, k, 0);

    // A slot can offer fewer than k admissible links; the per-slot
    // baselines then place what they can instead of failing the run,
    // matching how the maintained schedules thin out in sparse slots.
    let best_effort = |fresh: &dyn Fn(usize, usize) -> Result<Assignment, OptimizerError>,
                       t: usize|
     -> Result<Assignment, OptimizerError> {
        let mut want = k;
        loop {
            if want == 0 {
                return Ok(Assignment::empty());
            }
            match fresh(t, want) {
                Err(OptimizerError::InfeasibleK { available, .. }) if available < want => {
                    want = available;
                }
                other => return other,
            }
        }
    };
    let reoptimized = |snap: Assignment,
                       fresh: &dyn Fn(usize, usize) -> Result<Assignment, OptimizerError>|
     -> Result<(Assignment, Schedule), CliError> {
        let mut per_slot = Vec::with_capacity(ctx.n_slots());
        for t in 0..ctx.n_slots() {
            per_slot.push(if t < slot {
                Assignment::empty()
            } else {
                best_effort(fresh, t)?
            });
        }
        Ok((snap, Schedule { per_slot }))
    };
    let maintained = |snap: Assignment| -> Result<(Assignment, Schedule), CliError> {
        let (schedule, _) = schedule_with_hysteresis(ctx, &snap, constraints, slot)?;
        Ok((snap, schedule))
    };

    let (snapshot, schedule) = match algo {
        Algorithm::Tpilcd => {
            let out = tpilcd(ctx, k, ga, constraints, slot)?;
            (out.snapshot, out.schedule)
        }
        Algorithm::Otlc => maintained(otlc(ctx, ga, k, slot, constraints)?.best)?,
        Algorithm::MaxTimeWeight => maintained(max_time_weight(ctx, k, slot, constraints)?)?,
        Algorithm::Exact => {
            let budget = r.exact_budget.unwrap_or(DEFAULT_EXACT_BUDGET);
            maintained(exact_min_apl(ctx, k, slot, constraints, budget)?.assignment)?
        }
        Algorithm::Greedy => {
            let snap = greedy_shortest(ctx, k, slot, constraints)?;
            reoptimized(snap, &|t, want| greedy_shortest(ctx, want, t, constraints))?
        }
        Algorithm::Random => {
            let snap = random_uniform(
                ctx,
                k,
                slot,
                stream(r.seed, STREAM_RANDOM, iface, k, slot),
                constraints,
            )?;
            reoptimized(snap, &|t, want| {
                random_uniform(
                    ctx,
                    want,
                    t,
                    stream(r.seed, STREAM_RANDOM, iface, k, t),
                    constraints,
                )
            })?
        }
    };

    let report = metrics_report(
        ctx,
        &algo.to_string(),
        &snapshot,
        Some(&schedule),
        slot,
        &r.rates,
    )?;
    Ok(InterfaceOutcome {
        snapshot,
        schedule,
        report,
    })
}

/// Propagated layers and pristine stack quantities shared by every k.
struct StackEnv {
    topos: Vec<LayerTopology>,
    ephs: Vec<Ephemeris>,
    /// Summed intra-layer link rate at the deployment slot.
    isolated_rate_bps: f64,
    isolated_proxy_bps: f64,
}

fn intra_rate(
    eph: &Ephemeris,
    topo: &LayerTopology,
    slot: usize,
    rates: &RateParams,
) -> Result<f64, CliError> {
    let mut sum = 0.0;
    for &(u, v, _) in &topo.edges {
        let d = chord_km(eph.state(u as usize, slot), eph.state(v as usize, slot));
        sum += link_rate(rates, d)?;
    }
    Ok(sum)
}

fn stack_env(r: &Resolved) -> Result<StackEnv, CliError> {
    let topos: Vec<LayerTopology> = r
        .specs
        .iter()
        .enumerate()
        .map(|(i, s)| build_gridplus(i, s, SeamMode::PhaseShifted))
        .collect();
    let ephs: Vec<Ephemeris> = r
        .specs
        .iter()
        .enumerate()
        .map(|(i, s)| propagate_spec(i, s, &r.grid, PhasingConvention::TotalSatellites))
        .collect::<Result<_, _>>()?;
    let mut isolated_rate_bps = 0.0;
    for (eph, topo) in ephs.iter().zip(&topos) {
        isolated_rate_bps += intra_rate(eph, topo, r.snapshot_slot, &r.rates)?;
    }
    let refs: Vec<&LayerTopology> = topos.iter().collect();
    let isolated = bfs_apl(&assemble_supra(&refs, &[])?);
    let isolated_proxy_bps = coverage_weighted_proxy(isolated_rate_bps, &isolated);
    Ok(StackEnv {
        topos,
        ephs,
        isolated_rate_bps,
        isolated_proxy_bps,
    })
}

/// Whole-stack figures for one deployment size; for a two-layer
/// scenario these coincide with the single interface's metrics.
#[derive(Debug, Clone, Serialize)]
pub struct StackMetrics {
    pub apl: f64,
    pub reachable_pairs: u64,
    pub unreachable_pairs: u64,
    pub coverage: f64,
    pub total_rate_bps: f64,
    pub proxy_bps: f64,
    pub isolated_proxy_bps: f64,
    pub gain: f64,
    /// Summed per-interface deployment cost.
    pub cost: f64,
    /// Summed per-interface terminal re-targets over the horizon.
    pub handovers: u64,
}

fn stack_metrics(
    env: &StackEnv,
    r: &Resolved,
    pairs: &[(SatelliteId, SatelliteId)],
    interfaces: &[MetricsReport],
) -> Result<StackMetrics, CliError> {
    let refs: Vec<&LayerTopology> = env.topos.iter().collect();
    let supra = assemble_supra(&refs, pairs)?;
    let apl: AplResult = bfs_apl(&supra);
    let mut ilc_rate = 0.0;
    for &(a, b) in pairs {
        let d = chord_km(
            env.ephs[a.layer].state(a.flat(r.specs[a.layer].sats_per_plane), r.snapshot_slot),
            env.ephs[b.layer].state(b.flat(r.specs[b.layer].sats_per_plane), r.snapshot_slot),
        );
        ilc_rate += link_rate(&r.rates, d)?;
    }
    let total = env.isolated_rate_bps + ilc_rate;
    let proxy = coverage_weighted_proxy(total, &apl);
    let gain = if env.isolated_proxy_bps > 0.0 {
        proxy / env.isolated_proxy_bps - 1.0
    } else {
        0.0
    };
    Ok(StackMetrics {
        apl: apl.apl,
        reachable_pairs: apl.reachable_pairs,
        unreachable_pairs: apl.unreachable_pairs,
        coverage: apl.reachable_pairs as f64
            / (apl.reachable_pairs + apl.unreachable_pairs) as f64,
        total_rate_bps: total,
        proxy_bps: proxy,
        isolated_proxy_bps: env.isolated_proxy_bps,
        gain,
        cost: interfaces.iter().map(|m| m.deployment_cost).sum(),
        handovers: interfaces
            .iter()
            .filter_map(|m| m.handovers.as_ref().map(|h| h.total))
            .sum(),
    })
}

/// Relabels an interface-local assignment (layers 0/1) into stack
/// coordinates (layers i/i+1).
fn relabel(pairs: &[(SatelliteId, SatelliteId)], iface: usize) -> Vec<(SatelliteId, SatelliteId)> {
    pairs
        .iter()
        .map(|&(a, b)| {
            (
                SatelliteId::new(iface, a.plane, a.slot),
                SatelliteId::new(iface + 1, b.plane, b.slot),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct KResult {
    pub k: usize,
    pub interfaces: Vec<MetricsReport>,
    pub stack: StackMetrics,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LogFit {
    pub a: f64,
    pub b: f64,
    pub r2: f64,
}

/// Least-squares fit of y = a + b ln x.
pub fn fit_log(points: &[(f64, f64)]) -> LogFit {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (a + b * x);
            e * e
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    LogFit { a, b, r2 }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrafficSummary {
    /// Deployment size whose schedule was replayed.
    pub k: usize,
    pub slots: usize,
    pub mean_hops_avg: f64,
    pub mean_hops_std: f64,
    pub baseline_mean_hops_avg: f64,
    pub baseline_mean_hops_std: f64,
    /// Share of comparable slots where the deployment beat the
    /// single-layer baseline on mean hops.
    pub slots_below_baseline_pct: f64,
    pub served_flows_min: usize,
    pub served_flows_max: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub seed: u64,
    pub layers: Vec<String>,
    pub n_slots: usize,
    pub snapshot_slot: usize,
    pub ks: Vec<usize>,
    pub results: Vec<KResult>,
    /// a + b ln k fit of the stack path-length curve, for sweeps of at
    /// least three points.
    pub log_fit: Option<LogFit>,
    /// Set when a sweep stopped early on an infeasible k.
    pub truncated: Option<String>,
    pub traffic: Option<TrafficSummary>,
}

pub struct RunOutput {
    pub summary: RunSummary,
    pub files: Vec<PathBuf>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

struct TrafficSeries {
    policy: Vec<SlotTrafficReport>,
    baseline: Vec<SlotTrafficReport>,
    summary: TrafficSummary,
}

fn replay_traffic(
    ctx: &TwoLayerContext,
    r: &Resolved,
    schedule: &Schedule,
    k: usize,
) -> Result<TrafficSeries, CliError> {
    let t = r.traffic.as_ref().expect("caller checked traffic config");
    let flows = generate_flows(&t.cities, t.n_flows, t.volume, t.seed)?;
    let empty = Assignment::empty();
    let mut policy = Vec::with_capacity(ctx.n_slots());
    let mut baseline = Vec::with_capacity(ctx.n_slots());
    for slot in 0..ctx.n_slots() {
        policy.push(attach_and_route(
            ctx,
            &t.cities,
            &flows,
            &schedule.per_slot[slot],
            slot,
            AttachmentPolicy::AnyLayer,
            t.min_elevation_deg,
        )?);
        baseline.push(attach_and_route(
            ctx,
            &t.cities,
            &flows,
            &empty,
            slot,
            AttachmentPolicy::SingleLayerPerFlow,
            t.min_elevation_deg,
        )?);
    }
    let hops: Vec<f64> = policy.iter().map(|s| s.mean_hops).collect();
    let base_hops: Vec<f64> = baseline.iter().map(|s| s.mean_hops).collect();
    let (avg, std) = mean_std(&hops);
    let (bavg, bstd) = mean_std(&base_hops);
    let mut comparable = 0usize;
    let mut below = 0usize;
    for (p, b) in policy.iter().zip(&baseline) {
        if p.served_flows > 0 && b.served_flows > 0 {
            comparable += 1;
            if p.mean_hops < b.mean_hops {
                below += 1;
            }
        }
    }
    let summary = TrafficSummary {
        k,
        slots: ctx.n_slots(),
        mean_hops_avg: avg,
        mean_hops_std: std,
        baseline_mean_hops_avg: bavg,
        baseline_mean_hops_std: bstd,
        slots_below_baseline_pct: if comparable > 0 {
            100.0 * below as f64 / comparable as f64
        } else {
            0.0
        },
        served_flows_min: policy.iter().map(|s| s.served_flows).min().unwrap_or(0),
        served_flows_max: policy.iter().map(|s| s.served_flows).max().unwrap_or(0),
    };
    Ok(TrafficSeries {
        policy,
        baseline,
        summary,
    })
}

/// Builds the pristine context of every interface in the stack.
fn build_contexts(r: &Resolved) -> Result<Vec<TwoLayerContext>, CliError> {
    (0..r.specs.len() - 1)
        .map(|i| {
            Ok(TwoLayerContext::build(
                &r.specs[i],
                &r.specs[i + 1],
                &r.grid,
                r.eta1,
                r.eta2,
                PhasingConvention::TotalSatellites,
                SeamMode::PhaseShifted,
            )?)
        })
        .collect()
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

/// The per-interface series files, one directory per interface for
/// stacks deeper than two layers.
fn write_interface_series(
    dir: &Path,
    results: &[KResult],
    iface: usize,
    spec_small_n: usize,
    d_big: f64,
    files: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    fn get(kr: &KResult, iface: usize) -> &MetricsReport {
        &kr.interfaces[iface]
    }

    let apl = dir.join("apl_vs_k.csv");
    write_csv(
        &apl,
        &[
            "k",
            "apl_measured",
            "apl_analytic",
            "reachable_pairs",
            "unreachable_pairs",
        ],
        &results
            .iter()
            .map(|r| {
                vec![
                    r.k.to_string(),
                    fmt_f(get(r, iface).measured_apl),
                    fmt_f(get(r, iface).analytic_apl),
                    get(r, iface).reachable_pairs.to_string(),
                    get(r, iface).unreachable_pairs.to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    files.push(apl);

    let cost = dir.join("cost_vs_k.csv");
    write_csv(
        &cost,
        &["k", "cost_analytic", "cost_measured"],
        &results
            .iter()
            .map(|r| {
                let measured =
                    deployment_cost(get(r, iface).measured_apl, r.k, spec_small_n, d_big)?;
                Ok(vec![
                    r.k.to_string(),
                    fmt_f(get(r, iface).deployment_cost),
                    fmt_f(measured),
                ])
            })
            .collect::<Result<Vec<_>, CliError>>()?,
    )?;
    files.push(cost);

    let handovers = dir.join("handovers_vs_capability.csv");
    write_csv(
        &handovers,
        &["capability", "total", "break_events", "formation_events"],
        &results
            .iter()
            .map(|r| {
                let h = get(r, iface).handovers.as_ref();
                vec![
                    r.k.to_string(),
                    h.map_or(0, |h| h.total).to_string(),
                    h.map_or(0, |h| h.break_events).to_string(),
                    h.map_or(0, |h| h.formation_events).to_string(),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    files.push(handovers);

    let thr = dir.join("throughput_vs_k.csv");
    write_csv(
        &thr,
        &[
            "k",
            "stacked_proxy_bps",
            "isolated_proxy_bps",
            "gain",
            "coverage",
            "cross_proxy_bps",
            "total_rate_bps",
        ],
        &results
            .iter()
            .map(|r| {
                let t = &get(r, iface).throughput;
                vec![
                    r.k.to_string(),
                    fmt_f(t.stacked_proxy_bps),
                    fmt_f(t.isolated_proxy_bps),
                    fmt_f(t.gain),
                    fmt_f(t.coverage),
                    fmt_f(t.cross_proxy_bps),
                    fmt_f(t.total_rate_bps),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    files.push(thr);
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_sha256: String,
    seed: u64,
    algorithm: String,
    k_list: &'a [usize],
    versions: std::collections::BTreeMap<&'static str, &'a str>,
}

fn write_manifest(
    out_dir: &Path,
    command: &str,
    raw_config: &str,
    seed: u64,
    algorithm: &str,
    ks: &[usize],
    files: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    let digest = Sha256::digest(raw_config.as_bytes());
    let manifest = Manifest {
        command,
        config_sha256: format!("{digest:x}"),
        seed,
        algorithm: algorithm.to_string(),
        k_list: ks,
        versions: [
            ("mlsatnet", mlsatnet::VERSION),
            ("mlsatnet-cli", env!("CARGO_PKG_VERSION")),
        ]
        .into_iter()
        .collect(),
    };
    let path = out_dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, body + "\n").map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })?;
    files.push(path);
    Ok(())
}

/// Pristine-layer mean path length of the larger layer of an interface
/// and the smaller layer's size: the fixed parts of the cost model.
fn interface_cost_basis(r: &Resolved, iface: usize) -> (usize, f64) {
    let (na, nb) = (r.specs[iface].n_sats, r.specs[iface + 1].n_sats);
    let n_big = na.max(nb);
    let n_small = na.min(nb);
    // grid+ layers are 4-regular: first moment 4, second raw moment 16.
    let d_big = monolayer_apl(&LayerMoments::new(n_big, 4.0, 12.0))
        .expect("4-regular layer moments are valid");
    (n_small, d_big)
}

/// Executes a scenario end to end and writes every artifact file.
pub fn run_scenario(
    scenario: &Scenario,
    config_dir: &Path,
    raw_config: &str,
    out_dir: &Path,
    command: &str,
) -> Result<RunOutput, CliError> {
    let r = scenario.resolve(config_dir)?;
    let pristine = build_contexts(&r)?;
    let env = stack_env(&r)?;

    let mut results: Vec<KResult> = Vec::new();
    let mut truncated = None;
    let mut last_schedules: Vec<Schedule> = Vec::new();
    for &k in &r.ks {
        let mut outcomes: Vec<InterfaceOutcome> = Vec::with_capacity(pristine.len());
        let mut all_pairs: Vec<(SatelliteId, SatelliteId)> = Vec::new();
        let mut failed = None;
        for (i, base) in pristine.iter().enumerate() {
            let mut ctx = base.clone();
            if i > 0 {
                let spp = r.specs[i].sats_per_plane;
                let used: Vec<usize> = outcomes[i - 1]
                    .snapshot
                    .pairs
                    .iter()
                    .map(|&(_, b)| b.flat(spp))
                    .collect();
                ctx.mask_satellites(&used, &[]);
            }
            match run_interface(r.algorithm, &ctx, k, &r, i) {
                Ok(outcome) => {
                    all_pairs.extend(relabel(&outcome.snapshot.pairs, i));
                    outcomes.push(outcome);
                }
                Err(
                    e @ CliError::Optimizer(
                        OptimizerError::InfeasibleK { .. } | OptimizerError::BudgetExceeded { .. },
                    ),
                ) => {
                    failed = Some(e);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if let Some(e) = failed {
            if results.is_empty() {
                return Err(e);
            }
            truncated = Some(format!("sweep stopped at k = {k}: {e}"));
            break;
        }
        let reports: Vec<MetricsReport> = outcomes.iter().map(|o| o.report.clone()).collect();
        let stack = stack_metrics(&env, &r, &all_pairs, &reports)?;
        results.push(KResult {
            k,
            interfaces: reports,
            stack,
        });
        last_schedules = outcomes.into_iter().map(|o| o.schedule).collect();
    }

    let log_fit = if results.len() >= 3 {
        let pts: Vec<(f64, f64)> = results
            .iter()
            .map(|kr| (kr.k as f64, kr.stack.apl))
            .collect();
        Some(fit_log(&pts))
    } else {
        None
    };

    let mut traffic_series = None;
    if r.traffic.is_some() {
        // Replay uses the schedule of the largest completed k on the
        // single interface of a two-layer scenario.
        let k = results.last().expect("at least one k completed").k;
        traffic_series = Some(replay_traffic(&pristine[0], &r, &last_schedules[0], k)?);
    }

    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Write {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut files = Vec::new();
    let k_done: Vec<usize> = results.iter().map(|kr| kr.k).collect();
    write_manifest(
        out_dir,
        command,
        raw_config,
        r.seed,
        &r.algorithm.to_string(),
        &k_done,
        &mut files,
    )?;

    let n_interfaces = r.specs.len() - 1;
    if n_interfaces == 1 {
        let (n_small, d_big) = interface_cost_basis(&r, 0);
        write_interface_series(out_dir, &results, 0, n_small, d_big, &mut files)?;
    } else {
        for i in 0..n_interfaces {
            let dir = out_dir.join(format!("interface_{i}"));
            std::fs::create_dir_all(&dir).map_err(|source| CliError::Write {
                path: dir.display().to_string(),
                source,
            })?;
            let (n_small, d_big) = interface_cost_basis(&r, i);
            write_interface_series(&dir, &results, i, n_small, d_big, &mut files)?;
        }
        let stack_path = out_dir.join("stack_vs_k.csv");
        write_csv(
            &stack_path,
            &[
                "k",
                "apl",
                "coverage",
                "proxy_bps",
                "isolated_proxy_bps",
                "gain",
                "cost",
                "handovers",
            ],
            &results
                .iter()
                .map(|kr| {
                    vec![
                        kr.k.to_string(),
                        fmt_f(kr.stack.apl),
                        fmt_f(kr.stack.coverage),
                        fmt_f(kr.stack.proxy_bps),
                        fmt_f(kr.stack.isolated_proxy_bps),
                        fmt_f(kr.stack.gain),
                        fmt_f(kr.stack.cost),
                        kr.stack.handovers.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        )?;
        files.push(stack_path);
    }

    if let Some(ts) = &traffic_series {
        let path = out_dir.join("hops_vs_time.csv");
        write_csv(
            &path,
            &[
                "slot",
                "mean_hops",
                "served_flows",
                "unserved_flows",
                "throughput_bps",
                "baseline_mean_hops",
                "baseline_served_flows",
                "baseline_unserved_flows",
                "baseline_throughput_bps",
            ],
            &ts.policy
                .iter()
                .zip(&ts.baseline)
                .map(|(p, b)| {
                    vec![
                        p.slot.to_string(),
                        fmt_f(p.mean_hops),
                        p.served_flows.to_string(),
                        p.unserved_flows.to_string(),
                        fmt_f(p.total_throughput_bps),
                        fmt_f(b.mean_hops),
                        b.served_flows.to_string(),
                        b.unserved_flows.to_string(),
                        fmt_f(b.total_throughput_bps),
                    ]
                })
                .collect::<Vec<_>>(),
        )?;
        files.push(path);
    }

    if r.svg {
        if results.len() >= 2 {
            let apl_pts: Vec<(f64, f64)> = results
                .iter()
                .map(|kr| (kr.k as f64, kr.stack.apl))
                .collect();
            let path = out_dir.join("apl_vs_k.svg");
            svg::line_chart(
                "Stack mean path length vs deployed links",
                "k",
                "mean path length",
                &[svg::Series {
                    label: "apl",
                    points: &apl_pts,
                }],
                &path,
            )?;
            files.push(path);

            let h_pts: Vec<(f64, f64)> = results
                .iter()
                .map(|kr| (kr.k as f64, kr.stack.handovers as f64))
                .collect();
            let path = out_dir.join("handovers_vs_capability.svg");
            svg::line_chart(
                "Handovers vs provisioned links",
                "capability (k)",
                "terminal re-targets",
                &[svg::Series {
                    label: "handovers",
                    points: &h_pts,
                }],
                &path,
            )?;
            files.push(path);
        }
        if let Some(ts) = &traffic_series {
            let p_pts: Vec<(f64, f64)> = ts
                .policy
                .iter()
                .map(|s| (s.slot as f64, s.mean_hops))
                .collect();
            let b_pts: Vec<(f64, f64)> = ts
                .baseline
                .iter()
                .map(|s| (s.slot as f64, s.mean_hops))
                .collect();
            let path = out_dir.join("hops_vs_time.svg");
            svg::line_chart(
                "Mean flow hops over time",
                "slot",
                "mean hops",
                &[
                    svg::Series {
                        label: "deployed",
                        points: &p_pts,
                    },
                    svg::Series {
                        label: "single-layer baseline",
                        points: &b_pts,
                    },
                ],
                &path,
            )?;
            files.push(path);
        }
    }

    let summary = RunSummary {
        algorithm: r.algorithm.to_string(),
        seed: r.seed,
        layers: r.specs.iter().map(|s| s.name.clone()).collect(),
        n_slots: r.grid.n_slots,
        snapshot_slot: r.snapshot_slot,
        ks: k_done,
        results,
        log_fit,
        truncated,
        traffic: traffic_series.map(|t| t.summary),
    };
    let metrics_path = out_dir.join("metrics.json");
    let body = serde_json::to_string_pretty(&summary)?;
    std::fs::write(&metrics_path, body + "\n").map_err(|source| CliError::Write {
        path: metrics_path.display().to_string(),
        source,
    })?;
    files.push(metrics_path);

    Ok(RunOutput { summary, files })
}

/// One line of the algorithm comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub algorithm: String,
    pub k: usize,
    pub apl: f64,
    pub cost: f64,
    pub handovers: u64,
    pub proxy_bps: f64,
    pub gain: f64,
}

/// Runs several strategies on one scenario and tabulates stack-level
/// figures, one row per algorithm and deployment size.
pub fn compare(
    scenario: &Scenario,
    config_dir: &Path,
    algorithms: &[String],
    out_dir: Option<&Path>,
    raw_config: &str,
) -> Result<(Vec<CompareRow>, Vec<PathBuf>), CliError> {
    let algos: Vec<Algorithm> = algorithms
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    let r = scenario.resolve(config_dir)?;
    let pristine = build_contexts(&r)?;
    let env = stack_env(&r)?;

    let mut rows = Vec::new();
    for algo in algos {
        let mut variant = r.clone();
        variant.algorithm = algo;
        for &k in &r.ks {
            let mut outcomes: Vec<InterfaceOutcome> = Vec::with_capacity(pristine.len());
            let mut all_pairs = Vec::new();
            for (i, base) in pristine.iter().enumerate() {
                let mut ctx = base.clone();
                if i > 0 {
                    let spp = r.specs[i].sats_per_plane;
                    let used: Vec<usize> = outcomes[i - 1]
                        .snapshot
                        .pairs
                        .iter()
                        .map(|&(_, b)| b.flat(spp))
                        .collect();
                    ctx.mask_satellites(&used, &[]);
                }
                let outcome = run_interface(algo, &ctx, k, &variant, i)?;
                all_pairs.extend(relabel(&outcome.snapshot.pairs, i));
                outcomes.push(outcome);
            }
            let reports: Vec<MetricsReport> =
                outcomes.iter().map(|o| o.report.clone()).collect();
            let stack = stack_metrics(&env, &r, &all_pairs, &reports)?;
            rows.push(CompareRow {
                algorithm: algo.to_string(),
                k,
                apl: stack.apl,
                cost: stack.cost,
                handovers: stack.handovers,
                proxy_bps: stack.proxy_bps,
                gain: stack.gain,
            });
        }
    }

    let mut files = Vec::new();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.display().to_string(),
            source,
        })?;
        write_manifest(
            dir,
            "compare",
            raw_config,
            r.seed,
            &algorithms.join(","),
            &r.ks,
            &mut files,
        )?;
        let path = dir.join("comparison.csv");
        write_csv(
            &path,
            &[
                "algorithm",
                "k",
                "apl",
                "cost",
                "handovers",
                "proxy_bps",
                "gain",
            ],
            &rows
                .iter()
                .map(|row| {
                    vec![
                        row.algorithm.clone(),
                        row.k.to_string(),
                        fmt_f(row.apl),
                        fmt_f(row.cost),
                        row.handovers.to_string(),
                        fmt_f(row.proxy_bps),
                        fmt_f(row.gain),
                    ]
                })
                .collect::<Vec<_>>(),
        )?;
        files.push(path);
    }
    Ok((rows, files))
}

/// Fixed-width text rendering of comparison rows.
pub fn render_table(rows: &[CompareRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:>4} {:>10} {:>12} {:>10} {:>16} {:>8}\n",
        "algorithm", "k", "apl", "cost", "handovers", "proxy_bps", "gain%"
    ));
    for row in rows {
        out.push_str(&format!(
            "{:<16} {:>4} {:>10.4} {:>12.2} {:>10} {:>16.0} {:>8.2}\n",
            row.algorithm,
            row.k,
            row.apl,
            row.cost,
            row.handovers,
            row.proxy_bps,
            row.gain * 100.0
        ));
    }
    out
}
