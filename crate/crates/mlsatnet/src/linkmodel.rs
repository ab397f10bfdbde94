//! Inter-layer link feasibility, Shannon rates, and candidate screening.
//!
//! A satellite pair from two layers is a candidate inter-layer connection
//! (ILC) when, slot by slot, it passes three screens:
//!
//! 1. line of sight: chord distance within the Earth-tangent limit
//!    sqrt(h_i(h_i + 2R)) + sqrt(h_j(h_j + 2R)),
//! 2. co-motion: both satellites moving in the same north/south sense,
//!    so the pointing geometry stays stable,
//! 3. time-weight window: the normalized product of the link's remaining
//!    visible time and its time to the next break falls inside
//!    [eta1, eta2], cutting both soon-to-break and over-committed pairs.
//!
//! Link capacity is Shannon over free space: R = B log2(1 + SNR) with
//! SNR = P G0^2 / (kB tau B F) and path loss F = (4 pi d f / c)^2. The
//! antenna gain defaults are calibrated, not physical: they are chosen so
//! the shortest intra-layer grid+ link lands at 1 Gbps and everything
//! else follows from distance ratios.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constellation::{Ephemeris, SatState, SatelliteId, TimeGrid, EARTH_RADIUS_KM};

/// Boltzmann constant, J/K.
pub const BOLTZMANN_J_PER_K: f64 = 1.381e-23;
/// Receiver noise temperature, K.
pub const NOISE_TEMPERATURE_K: f64 = 354.18;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 2.997_924_58e8;
/// Calibration anchor: approximately the shortest Globalstar grid+ link.
pub const REFERENCE_DISTANCE_KM: f64 = 4600.0;
/// Calibration anchor rate at the reference distance.
pub const REFERENCE_RATE_BPS: f64 = 1.0e9;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("altitude must be positive, got {0} km")]
    NonPositiveAltitude(f64),
    #[error("distance must be positive, got {0} km")]
    NonPositiveDistance(f64),
    #[error("ephemerides use different time grids")]
    GridMismatch,
    #[error("slot {slot} out of range ({n_slots} slots)")]
    SlotOutOfRange { slot: usize, n_slots: usize },
    #[error("candidate pair is not visible at slot {0}")]
    NotVisible(usize),
    #[error("candidate screening joins two distinct layers, got layer {0} twice")]
    SameLayer(usize),
    #[error("time-weight window [{0}, {1}] is not a sub-interval of [0, 1]")]
    BadWindow(f64, f64),
    #[error("co-motion needs at least 2 slots, grid has {0}")]
    HorizonTooShort(usize),
}

/// Maximum line-of-sight distance between shells at altitudes h_i, h_j:
/// the sum of the two horizon tangents over a spherical Earth.
pub fn max_los_distance(h_i_km: f64, h_j_km: f64) -> Result<f64, LinkError> {
    for h in [h_i_km, h_j_km] {
        if !(h > 0.0) {
            return Err(LinkError::NonPositiveAltitude(h));
        }
    }
    let t = |h: f64| (h * (h + 2.0 * EARTH_RADIUS_KM)).sqrt();
    Ok(t(h_i_km) + t(h_j_km))
}

/// Euclidean chord between two states, km.
pub fn chord_km(a: &SatState, b: &SatState) -> f64 {
    let d0 = a.position_km[0] - b.position_km[0];
    let d1 = a.position_km[1] - b.position_km[1];
    let d2 = a.position_km[2] - b.position_km[2];
    (d0 * d0 + d1 * d1 + d2 * d2).sqrt()
}

fn check_grids(a: &Ephemeris, b: &Ephemeris, slot: usize) -> Result<(), LinkError> {
    if a.grid.slot_seconds != b.grid.slot_seconds || a.grid.n_slots != b.grid.n_slots {
        return Err(LinkError::GridMismatch);
    }
    if slot >= a.grid.n_slots {
        return Err(LinkError::SlotOutOfRange {
            slot,
            n_slots: a.grid.n_slots,
        });
    }
    Ok(())
}

/// Distance between two satellites of (usually different) layers at one
/// shared slot.
pub fn inter_distance(
    eph_a: &Ephemeris,
    sat_a: usize,
    eph_b: &Ephemeris,
    sat_b: usize,
    slot: usize,
) -> Result<f64, LinkError> {
    check_grids(eph_a, eph_b, slot)?;
    Ok(chord_km(eph_a.state(sat_a, slot), eph_b.state(sat_b, slot)))
}

/// Line-of-sight test; the boundary distance itself still sees.
pub fn is_visible(distance_km: f64, max_distance_km: f64) -> bool {
    distance_km <= max_distance_km
}

/// North/south latitude trend at a slot, degrees per slot. Uses the
/// forward difference; the final slot falls back to the backward one so
/// every slot of the horizon carries a direction.
fn latitude_trend(eph: &Ephemeris, sat: usize, slot: usize) -> f64 {
    let n = eph.grid.n_slots;
    if slot + 1 < n {
        eph.state(sat, slot + 1).latitude_deg - eph.state(sat, slot).latitude_deg
    } else {
        eph.state(sat, slot).latitude_deg - eph.state(sat, slot - 1).latitude_deg
    }
}

/// Co-motion test: both satellites strictly ascending or strictly
/// descending at the slot.
pub fn is_comoving(
    eph_a: &Ephemeris,
    sat_a: usize,
    eph_b: &Ephemeris,
    sat_b: usize,
    slot: usize,
) -> Result<bool, LinkError> {
    check_grids(eph_a, eph_b, slot)?;
    if eph_a.grid.n_slots < 2 {
        return Err(LinkError::HorizonTooShort(eph_a.grid.n_slots));
    }
    Ok(latitude_trend(eph_a, sat_a, slot) * latitude_trend(eph_b, sat_b, slot) > 0.0)
}

/// Shannon-rate parameters. `antenna_gain` is the linear gain G0 of each
/// end; the same value enters twice in the link budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateParams {
    pub bandwidth_hz: f64,
    pub tx_power_w: f64,
    pub antenna_gain: f64,
    pub carrier_hz: f64,
    pub boltzmann_j_per_k: f64,
    pub noise_temp_k: f64,
}

impl Default for RateParams {
    fn default() -> Self {
        RateParams::calibrated(REFERENCE_DISTANCE_KM, REFERENCE_RATE_BPS)
    }
}

impl RateParams {
    /// Derives the antenna gain so that a link of `reference_km` carries
    /// exactly `target_bps`, holding the other defaults fixed.
    pub fn calibrated(reference_km: f64, target_bps: f64) -> Self {
        let bandwidth_hz = 20.0e6;
        let tx_power_w = 3.74;
        let carrier_hz = 26.5e9;
        let snr = (target_bps / bandwidth_hz).exp2() - 1.0;
        let loss = path_loss_factor(reference_km, carrier_hz);
        let gain_sq = snr * BOLTZMANN_J_PER_K * NOISE_TEMPERATURE_K * bandwidth_hz * loss
            / tx_power_w;
        RateParams {
            bandwidth_hz,
            tx_power_w,
            antenna_gain: gain_sq.sqrt(),
            carrier_hz,
            boltzmann_j_per_k: BOLTZMANN_J_PER_K,
            noise_temp_k: NOISE_TEMPERATURE_K,
        }
    }

    /// Linear signal-to-noise ratio at a distance.
    pub fn snr(&self, distance_km: f64) -> f64 {
        self.tx_power_w * self.antenna_gain * self.antenna_gain
            / (self.boltzmann_j_per_k
                * self.noise_temp_k
                * self.bandwidth_hz
                * path_loss_factor(distance_km, self.carrier_hz))
    }
}

/// Free-space loss factor (4 pi d f / c)^2.
pub fn path_loss_factor(distance_km: f64, carrier_hz: f64) -> f64 {
    let d_m = distance_km * 1.0e3;
    let x = 4.0 * std::f64::consts::PI * d_m * carrier_hz / SPEED_OF_LIGHT_M_S;
    x * x
}

/// Shannon capacity B log2(1 + SNR), bit/s.
pub fn link_rate(params: &RateParams, distance_km: f64) -> Result<f64, LinkError> {
    if !(distance_km > 0.0) {
        return Err(LinkError::NonPositiveDistance(distance_km));
    }
    Ok(params.bandwidth_hz * (1.0 + params.snr(distance_km)).log2())
}

/// Remaining-time profile of a visibility mask.
///
/// For each slot: `total_remaining` counts every later-or-equal visible
/// slot of the horizon, `residual` counts only the unbroken run starting
/// here. Both are zero on invisible slots; both are in seconds.
pub fn windows_from_mask(mask: &[bool], slot_seconds: f64) -> (Vec<f64>, Vec<f64>) {
    let n = mask.len();
    let mut total = vec![0.0; n];
    let mut residual = vec![0.0; n];
    let mut seen = 0u32;
    let mut run = 0u32;
    for t in (0..n).rev() {
        if mask[t] {
            seen += 1;
            run += 1;
            total[t] = seen as f64 * slot_seconds;
            residual[t] = run as f64 * slot_seconds;
        } else {
            run = 0;
        }
    }
    (total, residual)
}

/// One screened satellite pair with its per-slot feasibility profile.
#[derive(Debug, Clone)]
pub struct CandidateIlc {
    pub a: SatelliteId,
    pub b: SatelliteId,
    pub a_flat: usize,
    pub b_flat: usize,
    /// Chord distance per slot, defined everywhere.
    pub distance_km: Vec<f64>,
    /// Visibility and co-motion both hold.
    pub physical: Vec<bool>,
    /// `physical` and the time weight inside [eta1, eta2].
    pub admissible: Vec<bool>,
    pub total_remaining_s: Vec<f64>,
    pub residual_s: Vec<f64>,
    /// Normalized time weight, zero outside the physical window.
    pub weight: Vec<f64>,
}

impl CandidateIlc {
    /// Time weight at a slot; querying outside the physical window is an
    /// error rather than a silent zero.
    pub fn time_weight(&self, slot: usize) -> Result<f64, LinkError> {
        if slot >= self.weight.len() {
            return Err(LinkError::SlotOutOfRange {
                slot,
                n_slots: self.weight.len(),
            });
        }
        if !self.physical[slot] {
            return Err(LinkError::NotVisible(slot));
        }
        Ok(self.weight[slot])
    }
}

/// All screened pairs of one layer interface, sorted by flat indices.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub layer_a: usize,
    pub layer_b: usize,
    pub sats_per_plane_a: usize,
    pub sats_per_plane_b: usize,
    pub grid: TimeGrid,
    pub eta1: f64,
    pub eta2: f64,
    /// Normalization anchors: the longest remaining time and the longest
    /// unbroken run over every physically feasible pair of this set.
    pub max_total_remaining_s: f64,
    pub max_residual_s: f64,
    pub candidates: Vec<CandidateIlc>,
}

impl CandidateSet {
    /// Indices of candidates admissible at a slot.
    pub fn admissible_at(&self, slot: usize) -> Vec<usize> {
        (0..self.candidates.len())
            .filter(|&i| self.candidates[i].admissible[slot])
            .collect()
    }

    pub fn find(&self, a_flat: usize, b_flat: usize) -> Option<usize> {
        self.candidates
            .binary_search_by_key(&(a_flat, b_flat), |c| (c.a_flat, c.b_flat))
            .ok()
    }

    /// One row per admissible (pair, slot) combination.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "layer_a", "plane_a", "slot_a", "layer_b", "plane_b", "slot_b", "slot_index",
            "distance_km", "weight",
        ])?;
        for c in &self.candidates {
            for t in 0..self.grid.n_slots {
                if c.admissible[t] {
                    wtr.write_record([
                        c.a.layer.to_string(),
                        c.a.plane.to_string(),
                        c.a.slot.to_string(),
                        c.b.layer.to_string(),
                        c.b.plane.to_string(),
                        c.b.slot.to_string(),
                        t.to_string(),
                        format!("{:.6}", c.distance_km[t]),
                        format!("{:.6}", c.weight[t]),
                    ])?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Screens every cross pair of two layers over the whole horizon.
///
/// The time weight of pair p at slot t is
/// (total_remaining(t)/max_total) * (residual(t)/max_residual), with the
/// maxima taken over this candidate set. A pair joins the set when at
/// least one slot is physically feasible and inside [eta1, eta2].
pub fn build_candidate_set(
    eph_a: &Ephemeris,
    eph_b: &Ephemeris,
    eta1: f64,
    eta2: f64,
) -> Result<CandidateSet, LinkError> {
    if eph_a.layer == eph_b.layer {
        return Err(LinkError::SameLayer(eph_a.layer));
    }
    check_grids(eph_a, eph_b, 0)?;
    if eph_a.grid.n_slots < 2 {
        return Err(LinkError::HorizonTooShort(eph_a.grid.n_slots));
    }
    if !(0.0 <= eta1 && eta1 <= eta2 && eta2 <= 1.0) {
        return Err(LinkError::BadWindow(eta1, eta2));
    }
    let n_slots = eph_a.grid.n_slots;
    let dt = eph_a.grid.slot_seconds;
    let d_max = max_los_distance(eph_a.spec.altitude_km, eph_b.spec.altitude_km)?;
    let spp_a = eph_a.spec.sats_per_plane;
    let spp_b = eph_b.spec.sats_per_plane;

    let pairs: Vec<(usize, usize)> = (0..eph_a.n_sats())
        .flat_map(|i| (0..eph_b.n_sats()).map(move |j| (i, j)))
        .collect();
    let mut screened: Vec<CandidateIlc> = pairs
        .par_iter()
        .filter_map(|&(i, j)| {
            let mut distance_km = Vec::with_capacity(n_slots);
            let mut physical = Vec::with_capacity(n_slots);
            let mut any = false;
            for t in 0..n_slots {
                let d = chord_km(eph_a.state(i, t), eph_b.state(j, t));
                let ok = is_visible(d, d_max)
                    && latitude_trend(eph_a, i, t) * latitude_trend(eph_b, j, t) > 0.0;
                distance_km.push(d);
                physical.push(ok);
                any |= ok;
            }
            if !any {
                return None;
            }
            let (total_remaining_s, residual_s) = windows_from_mask(&physical, dt);
            Some(CandidateIlc {
                a: SatelliteId::new(eph_a.layer, i / spp_a, i % spp_a),
                b: SatelliteId::new(eph_b.layer, j / spp_b, j % spp_b),
                a_flat: i,
                b_flat: j,
                distance_km,
                physical,
                admissible: Vec::new(),
                total_remaining_s,
                residual_s,
                weight: Vec::new(),
            })
        })
        .collect();

    let max_total = screened
        .iter()
        .flat_map(|c| c.total_remaining_s.iter().copied())
        .fold(0.0f64, f64::max);
    let max_residual = screened
        .iter()
        .flat_map(|c| c.residual_s.iter().copied())
        .fold(0.0f64, f64::max);

    for c in &mut screened {
        c.weight = (0..n_slots)
            .map(|t| {
                if c.physical[t] {
                    (c.total_remaining_s[t] / max_total) * (c.residual_s[t] / max_residual)
                } else {
                    0.0
                }
            })
            .collect();
        c.admissible = (0..n_slots)
            .map(|t| c.physical[t] && c.weight[t] >= eta1 && c.weight[t] <= eta2)
            .collect();
    }
    let mut candidates: Vec<CandidateIlc> = screened
        .into_iter()
        .filter(|c| c.admissible.iter().any(|&x| x))
        .collect();
    candidates.sort_by_key(|c| (c.a_flat, c.b_flat));
    Ok(CandidateSet {
        layer_a: eph_a.layer,
        layer_b: eph_b.layer,
        sats_per_plane_a: spp_a,
        sats_per_plane_b: spp_b,
        grid: eph_a.grid,
        eta1,
        eta2,
        max_total_remaining_s: max_total,
        max_residual_s: max_residual,
        candidates,
    })
}
