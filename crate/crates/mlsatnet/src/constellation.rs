//! Walker-delta constellation layers and ideal circular-orbit propagation.
//!
//! A layer is a Walker delta pattern N/P/F at one altitude and inclination.
//! Plane p gets RAAN 360*p/P. Satellite s of plane p starts at argument of
//! latitude 360*s/S plus an inter-plane phase shift controlled by the phase
//! factor F. Propagation is ideal two-body motion over a spherical Earth:
//! every satellite advances at the constant mean motion of its circular
//! orbit, so a layer is fully described by its spec and a time grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Spherical Earth radius, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Geocentric gravitational constant, km^3/s^2.
pub const MU_EARTH_KM3_S2: f64 = 398600.4418;

#[derive(Debug, Error)]
pub enum ConstellationError {
    #[error("invalid walker spec `{name}`: field `{field}`: {message}")]
    InvalidSpec {
        name: String,
        field: &'static str,
        message: String,
    },
    #[error("slot {slot} out of range (grid has {n_slots} slots)")]
    SlotOutOfRange { slot: usize, n_slots: usize },
    #[error("slot {slot} is the final slot; no forward difference exists")]
    NoForwardDifference { slot: usize },
    #[error("satellite index {sat} out of range ({n_sats} satellites)")]
    SatOutOfRange { sat: usize, n_sats: usize },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

/// How the inter-plane phase shift is derived from the phase factor F.
///
/// `TotalSatellites` is the common Walker convention: adjacent planes are
/// offset by 360*F/N degrees of anomaly. `PerPlane` offsets by 360*F/P
/// instead, for sources that measure F in units of a plane fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhasingConvention {
    #[default]
    TotalSatellites,
    PerPlane,
}

/// Walker delta pattern for one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkerSpec {
    pub name: String,
    /// Total satellite count; must equal `planes * sats_per_plane`.
    pub n_sats: usize,
    pub planes: usize,
    pub sats_per_plane: usize,
    /// Phase factor F, in `0..=sats_per_plane - 1`.
    pub phase_factor: usize,
    pub altitude_km: f64,
    pub inclination_deg: f64,
}

impl WalkerSpec {
    pub fn new(
        name: impl Into<String>,
        planes: usize,
        sats_per_plane: usize,
        phase_factor: usize,
        altitude_km: f64,
        inclination_deg: f64,
    ) -> Self {
        WalkerSpec {
            name: name.into(),
            n_sats: planes * sats_per_plane,
            planes,
            sats_per_plane,
            phase_factor,
            altitude_km,
            inclination_deg,
        }
    }

    pub fn validate(&self) -> Result<(), ConstellationError> {
        let err = |field, message: String| ConstellationError::InvalidSpec {
            name: self.name.clone(),
            field,
            message,
        };
        if self.planes == 0 {
            return Err(err("planes", "must be at least 1".into()));
        }
        if self.sats_per_plane == 0 {
            return Err(err("sats_per_plane", "must be at least 1".into()));
        }
        if self.n_sats != self.planes * self.sats_per_plane {
            return Err(err(
                "n_sats",
                format!(
                    "{} does not equal planes * sats_per_plane = {}",
                    self.n_sats,
                    self.planes * self.sats_per_plane
                ),
            ));
        }
        if self.phase_factor >= self.sats_per_plane {
            return Err(err(
                "phase_factor",
                format!(
                    "{} outside 0..={}",
                    self.phase_factor,
                    self.sats_per_plane - 1
                ),
            ));
        }
        if !(self.altitude_km > 0.0) {
            return Err(err("altitude_km", format!("{} must be > 0", self.altitude_km)));
        }
        if !(self.inclination_deg > 0.0 && self.inclination_deg <= 180.0) {
            return Err(err(
                "inclination_deg",
                format!("{} outside (0, 180]", self.inclination_deg),
            ));
        }
        Ok(())
    }

    /// Orbit radius, km.
    pub fn semi_major_axis_km(&self) -> f64 {
        EARTH_RADIUS_KM + self.altitude_km
    }

    /// Circular orbit period 2*pi*sqrt(a^3/mu), seconds.
    pub fn period_s(&self) -> f64 {
        let a = self.semi_major_axis_km();
        2.0 * std::f64::consts::PI * (a.powi(3) / MU_EARTH_KM3_S2).sqrt()
    }

    /// Mean motion, rad/s.
    pub fn mean_motion_rad_s(&self) -> f64 {
        (MU_EARTH_KM3_S2 / self.semi_major_axis_km().powi(3)).sqrt()
    }
}

/// Logical address of a satellite: layer, orbit plane, in-plane slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SatelliteId {
    pub layer: usize,
    pub plane: usize,
    pub slot: usize,
}

impl SatelliteId {
    pub fn new(layer: usize, plane: usize, slot: usize) -> Self {
        SatelliteId { layer, plane, slot }
    }

    /// Flat index within the layer, plane-major.
    pub fn flat(&self, sats_per_plane: usize) -> usize {
        self.plane * sats_per_plane + self.slot
    }
}

/// Discrete simulation horizon: `n_slots` samples, `slot_seconds` apart.
///
/// `epoch_s` locates slot 0 on an absolute clock; it only matters where
/// Earth rotation enters (city positions in the traffic module).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub epoch_s: f64,
    pub slot_seconds: f64,
    pub n_slots: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        // Two hours at one-minute resolution.
        TimeGrid {
            epoch_s: 0.0,
            slot_seconds: 60.0,
            n_slots: 120,
        }
    }
}

impl TimeGrid {
    pub fn new(slot_seconds: f64, n_slots: usize) -> Self {
        TimeGrid {
            epoch_s: 0.0,
            slot_seconds,
            n_slots,
        }
    }

    /// Seconds from slot 0 to slot `t`.
    pub fn offset_s(&self, slot: usize) -> f64 {
        slot as f64 * self.slot_seconds
    }

    /// Absolute time of slot `t`, seconds.
    pub fn absolute_s(&self, slot: usize) -> f64 {
        self.epoch_s + self.offset_s(slot)
    }
}

/// Initial orbital elements of one satellite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialOrbit {
    pub id: SatelliteId,
    pub raan_deg: f64,
    /// Argument of latitude at epoch, degrees in [0, 360).
    pub anomaly_deg: f64,
}

/// A fully laid-out layer: spec plus per-satellite initial elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDefinition {
    pub layer: usize,
    pub spec: WalkerSpec,
    pub satellites: Vec<InitialOrbit>,
}

/// Lays out a validated Walker spec into per-satellite initial elements.
pub fn build_constellation(
    layer: usize,
    spec: &WalkerSpec,
    convention: PhasingConvention,
) -> Result<LayerDefinition, ConstellationError> {
    spec.validate()?;
    let p = spec.planes as f64;
    let s = spec.sats_per_plane as f64;
    let phase_step_deg = match convention {
        PhasingConvention::TotalSatellites => 360.0 * spec.phase_factor as f64 / spec.n_sats as f64,
        PhasingConvention::PerPlane => 360.0 * spec.phase_factor as f64 / p,
    };
    let mut satellites = Vec::with_capacity(spec.n_sats);
    for plane in 0..spec.planes {
        let raan_deg = 360.0 * plane as f64 / p;
        for slot in 0..spec.sats_per_plane {
            let anomaly_deg =
                (360.0 * slot as f64 / s + phase_step_deg * plane as f64).rem_euclid(360.0);
            satellites.push(InitialOrbit {
                id: SatelliteId::new(layer, plane, slot),
                raan_deg,
                anomaly_deg,
            });
        }
    }
    Ok(LayerDefinition {
        layer,
        spec: spec.clone(),
        satellites,
    })
}

/// State of one satellite at one slot. Cartesian coordinates are
/// Earth-centered inertial; geodetic fields are derived from them over a
/// spherical Earth, so latitude/longitude and x/y/z always agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatState {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_km: f64,
    pub position_km: [f64; 3],
}

/// Per-slot states for every satellite of a layer, satellite-major.
#[derive(Debug, Clone)]
pub struct Ephemeris {
    pub layer: usize,
    pub spec: WalkerSpec,
    pub grid: TimeGrid,
    states: Vec<SatState>,
}

impl Ephemeris {
    pub fn n_sats(&self) -> usize {
        self.spec.n_sats
    }

    pub fn state(&self, sat: usize, slot: usize) -> &SatState {
        &self.states[sat * self.grid.n_slots + slot]
    }

    pub fn try_state(&self, sat: usize, slot: usize) -> Result<&SatState, ConstellationError> {
        if sat >= self.n_sats() {
            return Err(ConstellationError::SatOutOfRange {
                sat,
                n_sats: self.n_sats(),
            });
        }
        if slot >= self.grid.n_slots {
            return Err(ConstellationError::SlotOutOfRange {
                slot,
                n_slots: self.grid.n_slots,
            });
        }
        Ok(self.state(sat, slot))
    }

    /// Forward latitude difference lat(t+1) - lat(t), degrees. The sign is
    /// the satellite's north/south direction of motion at slot t.
    pub fn latitude_delta(&self, sat: usize, slot: usize) -> Result<f64, ConstellationError> {
        if slot + 1 >= self.grid.n_slots {
            return Err(ConstellationError::NoForwardDifference { slot });
        }
        let a = self.try_state(sat, slot)?;
        let b = self.state(sat, slot + 1);
        Ok(b.latitude_deg - a.latitude_deg)
    }
}

/// Propagates a layer over the grid with ideal circular two-body motion.
pub fn propagate(def: &LayerDefinition, grid: &TimeGrid) -> Ephemeris {
    let r = def.spec.semi_major_axis_km();
    let n = def.spec.mean_motion_rad_s();
    let inc = def.spec.inclination_deg.to_radians();
    let (sin_i, cos_i) = inc.sin_cos();
    let mut states = Vec::with_capacity(def.satellites.len() * grid.n_slots);
    for orbit in &def.satellites {
        let (sin_o, cos_o) = orbit.raan_deg.to_radians().sin_cos();
        let u0 = orbit.anomaly_deg.to_radians();
        for slot in 0..grid.n_slots {
            let u = u0 + n * grid.offset_s(slot);
            let (sin_u, cos_u) = u.sin_cos();
            let x = r * (cos_o * cos_u - sin_o * sin_u * cos_i);
            let y = r * (sin_o * cos_u + cos_o * sin_u * cos_i);
            let z = r * sin_u * sin_i;
            states.push(SatState {
                latitude_deg: (z / r).asin().to_degrees(),
                longitude_deg: y.atan2(x).to_degrees(),
                altitude_km: def.spec.altitude_km,
                position_km: [x, y, z],
            });
        }
    }
    Ephemeris {
        layer: def.layer,
        spec: def.spec.clone(),
        grid: *grid,
        states,
    }
}

/// Builds and propagates a layer in one step.
pub fn propagate_spec(
    layer: usize,
    spec: &WalkerSpec,
    grid: &TimeGrid,
    convention: PhasingConvention,
) -> Result<Ephemeris, ConstellationError> {
    Ok(propagate(&build_constellation(layer, spec, convention)?, grid))
}

/// Bundled constellation presets, parsed from the data file shipped with
/// the crate.
pub fn presets() -> Vec<WalkerSpec> {
    let raw = include_str!("../data/presets.csv");
    let mut out = Vec::new();
    let mut rdr = csv::Reader::from_reader(raw.as_bytes());
    for record in rdr.records() {
        let r = record.expect("bundled preset file is well-formed");
        let name = r[0].to_string();
        let planes: usize = r[1].parse().expect("planes");
        let spp: usize = r[2].parse().expect("sats_per_plane");
        let alt: f64 = r[3].parse().expect("altitude_km");
        let inc: f64 = r[4].parse().expect("inclination_deg");
        let f: usize = r[5].parse().expect("phase_factor");
        out.push(WalkerSpec::new(name, planes, spp, f, alt, inc));
    }
    out
}

/// Looks up a bundled preset by name (case-insensitive).
pub fn preset(name: &str) -> Result<WalkerSpec, ConstellationError> {
    presets()
        .into_iter()
        .find(|s| s.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| ConstellationError::UnknownPreset(name.to_string()))
}
