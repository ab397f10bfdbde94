//! Ground traffic over a deployed stack: city endpoints, population-
//! weighted flow generation, satellite attachment, and per-slot routing.
//!
//! Cities are fixed to the rotating Earth while the constellations are
//! propagated inertially, so a city's ECI position advances in longitude
//! at the sidereal rate. Each flow endpoint attaches to a visible
//! satellite; the flow is then routed hop-by-hop over the supra graph of
//! the stack, inter-layer links included.

use std::collections::{BTreeMap, VecDeque};
use std::io::Read;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constellation::{Ephemeris, SatelliteId, EARTH_RADIUS_KM};
use crate::optimizer::{Assignment, OptimizerError, TwoLayerContext};
use crate::topology::SupraAdjacency;

/// Sidereal rotation rate of the Earth, radians per second.
pub const EARTH_ROTATION_RAD_S: f64 = 7.2921159e-5;

/// Elevation mask below which a satellite does not count as visible.
pub const DEFAULT_MIN_ELEVATION_DEG: f64 = 10.0;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("city file line {line}: {msg}")]
    BadRecord { line: usize, msg: String },
    #[error("city file line {line}: duplicate city {name:?}")]
    DuplicateCity { line: usize, name: String },
    #[error("city {name:?} must have a positive population")]
    BadPopulation { name: String },
    #[error("need at least two cities to form a flow, got {0}")]
    TooFewCities(usize),
    #[error("{requested} distinct flows requested but only {available} city pairs exist")]
    TooManyPairs { requested: usize, available: usize },
    #[error("volume bounds must satisfy 0 < min <= max, got [{min}, {max}]")]
    BadVolumeRange { min: f64, max: f64 },
    #[error("flow volume must be positive and finite, got {0}")]
    BadVolume(f64),
    #[error("flow endpoint {0} is not a known city index")]
    UnknownCity(usize),
    #[error("minimum elevation must lie in [0, 90) degrees, got {0}")]
    BadElevation(f64),
    #[error("slot {slot} outside horizon of {n_slots} slots")]
    SlotOutOfRange { slot: usize, n_slots: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Optimizer(#[from] Box<OptimizerError>),
}

impl From<OptimizerError> for TrafficError {
    fn from(e: OptimizerError) -> Self {
        TrafficError::Optimizer(Box::new(e))
    }
}

/// A ground endpoint pinned to the rotating Earth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct City {
    pub name: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub population: f64,
}

impl City {
    /// ECI position at an absolute time, spherical Earth surface.
    pub fn position_km(&self, absolute_s: f64) -> [f64; 3] {
        let lat = self.lat_deg.to_radians();
        let lon = self.lon_deg.to_radians() + EARTH_ROTATION_RAD_S * absolute_s;
        [
            EARTH_RADIUS_KM * lat.cos() * lon.cos(),
            EARTH_RADIUS_KM * lat.cos() * lon.sin(),
            EARTH_RADIUS_KM * lat.sin(),
        ]
    }
}

/// Parses cities from CSV with a `name,lat_deg,lon_deg,population`
/// header. Records are validated one by one and errors name the
/// offending line.
pub fn load_cities<R: Read>(reader: R) -> Result<Vec<City>, TrafficError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let r = record?;
        let line = r.position().map_or(i + 2, |p| p.line() as usize);
        let bad = |msg: String| TrafficError::BadRecord { line, msg };
        let field = |idx: usize, label: &str| -> Result<f64, TrafficError> {
            r[idx]
                .trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("{label} is not a number: {:?}", &r[idx])))
        };
        let name = r[0].trim().to_string();
        if name.is_empty() {
            return Err(bad("empty city name".to_string()));
        }
        let lat_deg = field(1, "latitude")?;
        if !lat_deg.is_finite() || lat_deg.abs() > 90.0 {
            return Err(bad(format!("latitude {lat_deg} outside [-90, 90]")));
        }
        let lon_deg = field(2, "longitude")?;
        if !lon_deg.is_finite() || lon_deg.abs() > 180.0 {
            return Err(bad(format!("longitude {lon_deg} outside [-180, 180]")));
        }
        let population = field(3, "population")?;
        if !population.is_finite() || population <= 0.0 {
            return Err(bad(format!("population {population} must be positive")));
        }
        if seen.insert(name.clone(), line).is_some() {
            return Err(TrafficError::DuplicateCity { line, name });
        }
        out.push(City {
            name,
            lat_deg,
            lon_deg,
            population,
        });
    }
    Ok(out)
}

/// Loads a city file from disk.
pub fn load_cities_path(path: &Path) -> Result<Vec<City>, TrafficError> {
    let file = std::fs::File::open(path).map_err(|e| TrafficError::BadRecord {
        line: 0,
        msg: format!("cannot open {}: {e}", path.display()),
    })?;
    load_cities(file)
}

/// The hundred-city file bundled with the crate: large metropolitan
/// areas spread over both hemispheres, with populations used as traffic
/// weights.
pub fn builtin_cities() -> Vec<City> {
    load_cities(include_str!("../data/cities100.csv").as_bytes())
        .expect("bundled city file is well-formed")
}

/// One demand between two cities, endpoints as indices into a city list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CityFlow {
    pub src: usize,
    pub dst: usize,
    pub volume_bps: f64,
}

/// How much traffic a generated flow carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VolumeModel {
    Constant { bps: f64 },
    UniformRange { min_bps: f64, max_bps: f64 },
}

impl Default for VolumeModel {
    fn default() -> Self {
        VolumeModel::Constant { bps: 1.0e7 }
    }
}

impl VolumeModel {
    fn validate(&self) -> Result<(), TrafficError> {
        let (min, max) = match *self {
            VolumeModel::Constant { bps } => (bps, bps),
            VolumeModel::UniformRange { min_bps, max_bps } => (min_bps, max_bps),
        };
        if !(min.is_finite() && max.is_finite() && 0.0 < min && min <= max) {
            return Err(TrafficError::BadVolumeRange { min, max });
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            VolumeModel::Constant { bps } => bps,
            VolumeModel::UniformRange { min_bps, max_bps } => rng.gen_range(min_bps..=max_bps),
        }
    }
}

/// Destination conditioned on the origin: population-weighted over the
/// remaining cities. Rejection is exact here and almost always fast; if
/// one city dominates the weight, fall back to sampling the conditional
/// law directly.
fn draw_distinct(rng: &mut ChaCha8Rng, dist: &WeightedIndex<f64>, pops: &[f64], o: usize) -> usize {
    for _ in 0..200 {
        let d = dist.sample(rng);
        if d != o {
            return d;
        }
    }
    let others: Vec<usize> = (0..pops.len()).filter(|&j| j != o).collect();
    let cond = WeightedIndex::new(others.iter().map(|&j| pops[j]))
        .expect("at least one other city with positive weight");
    others[cond.sample(rng)]
}

/// Draws `n_flows` city pairs with both endpoints population-weighted:
/// origins proportional to population, destinations proportional to
/// population over the remaining cities. No unordered pair repeats
/// within one batch; duplicates are redrawn, and when redraws stall
/// (only a handful of pairs left unused) the generator enumerates the
/// unused pairs and picks one weighted by the product of endpoint
/// populations, orientation uniform.
pub fn generate_flows(
    cities: &[City],
    n_flows: usize,
    volume: VolumeModel,
    seed: u64,
) -> Result<Vec<CityFlow>, TrafficError> {
    let n = cities.len();
    if n < 2 {
        return Err(TrafficError::TooFewCities(n));
    }
    let available = n * (n - 1) / 2;
    if n_flows > available {
        return Err(TrafficError::TooManyPairs {
            requested: n_flows,
            available,
        });
    }
    volume.validate()?;
    for c in cities {
        if !c.population.is_finite() || c.population <= 0.0 {
            return Err(TrafficError::BadPopulation {
                name: c.name.clone(),
            });
        }
    }

    let pops: Vec<f64> = cities.iter().map(|c| c.population).collect();
    let dist = WeightedIndex::new(&pops).expect("validated positive weights");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used: BTreeMap<(usize, usize), ()> = BTreeMap::new();
    let mut flows = Vec::with_capacity(n_flows);
    while flows.len() < n_flows {
        let mut rejects = 0usize;
        let (src, dst) = loop {
            let o = dist.sample(&mut rng);
            let d = draw_distinct(&mut rng, &dist, &pops, o);
            if !used.contains_key(&(o.min(d), o.max(d))) {
                break (o, d);
            }
            rejects += 1;
            if rejects >= 200 {
                // Nearly every pair is taken: enumerate what is left.
                let unused: Vec<(usize, usize)> = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .filter(|key| !used.contains_key(key))
                    .collect();
                let widx = WeightedIndex::new(unused.iter().map(|&(i, j)| pops[i] * pops[j]))
                    .expect("unused pairs remain below n_flows");
                let (i, j) = unused[widx.sample(&mut rng)];
                break if rng.gen_bool(0.5) { (i, j) } else { (j, i) };
            }
        };
        used.insert((src.min(dst), src.max(dst)), ());
        flows.push(CityFlow {
            src,
            dst,
            volume_bps: volume.draw(&mut rng),
        });
    }
    Ok(flows)
}

/// How flow endpoints pick their access satellites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AttachmentPolicy {
    /// Each endpoint independently takes the closest visible satellite
    /// of either layer; routes may need the inter-layer interface.
    #[default]
    AnyLayer,
    /// Both endpoints of a flow attach within one layer - whichever
    /// minimizes the summed slant ranges with both endpoints covered -
    /// so the flow never depends on inter-layer links. The single-layer
    /// baseline.
    SingleLayerPerFlow,
}

/// Elevation of a satellite above a ground point's local horizon.
pub fn elevation_deg(ground_km: &[f64; 3], sat_km: &[f64; 3]) -> f64 {
    let to_sat = [
        sat_km[0] - ground_km[0],
        sat_km[1] - ground_km[1],
        sat_km[2] - ground_km[2],
    ];
    let range = (to_sat[0] * to_sat[0] + to_sat[1] * to_sat[1] + to_sat[2] * to_sat[2]).sqrt();
    let g_norm =
        (ground_km[0] * ground_km[0] + ground_km[1] * ground_km[1] + ground_km[2] * ground_km[2])
            .sqrt();
    let dot = ground_km[0] * to_sat[0] + ground_km[1] * to_sat[1] + ground_km[2] * to_sat[2];
    (dot / (g_norm * range)).asin().to_degrees()
}

/// One flow the network carried, with its access points and hop count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoutedFlow {
    pub flow: CityFlow,
    pub src_sat: SatelliteId,
    pub dst_sat: SatelliteId,
    /// Inter-satellite hops; zero when both endpoints share a satellite.
    pub hops: usize,
}

/// Traffic outcome of one slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotTrafficReport {
    pub slot: usize,
    pub served_flows: usize,
    /// Flows with an uncovered endpoint or no route between access
    /// satellites.
    pub unserved_flows: usize,
    /// Mean inter-satellite hop count over served flows, zero if none.
    pub mean_hops: f64,
    /// Summed volume of the served flows.
    pub total_throughput_bps: f64,
    /// Volume crossing each undirected inter-satellite link.
    pub link_load: BTreeMap<(SatelliteId, SatelliteId), f64>,
    pub routed: Vec<RoutedFlow>,
}

/// Closest visible satellite of one layer: flat index and slant range.
fn best_in_layer(
    eph: &Ephemeris,
    ground_km: &[f64; 3],
    slot: usize,
    min_elevation_deg: f64,
) -> Option<(usize, f64)> {
    let mut best: Option<(f64, usize)> = None;
    for s in 0..eph.n_sats() {
        let p = eph.state(s, slot).position_km;
        if elevation_deg(ground_km, &p) < min_elevation_deg {
            continue;
        }
        let d2 = (p[0] - ground_km[0]).powi(2)
            + (p[1] - ground_km[1]).powi(2)
            + (p[2] - ground_km[2]).powi(2);
        if best.map_or(true, |(bd, _)| d2 < bd) {
            best = Some((d2, s));
        }
    }
    best.map(|(d2, s)| (s, d2.sqrt()))
}

fn bfs_parents(supra: &SupraAdjacency, src: usize) -> Vec<u32> {
    let mut parent = vec![u32::MAX; supra.n];
    parent[src] = src as u32;
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for &v in supra.neighbors(u) {
            if parent[v as usize] == u32::MAX {
                parent[v as usize] = u as u32;
                queue.push_back(v as usize);
            }
        }
    }
    parent
}

fn id_of_node(ctx: &TwoLayerContext, node: usize) -> SatelliteId {
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

/// Attaches every flow endpoint to an access satellite and routes each
/// flow over the stack with the given links deployed.
///
/// A flow is served when both endpoints see a satellite under the
/// attachment policy and a route exists between the two access
/// satellites; everything else counts as unserved. Routes are shortest
/// paths on the supra graph, so the per-link loads conserve volume times
/// hop count.
pub fn attach_and_route(
    ctx: &TwoLayerContext,
    cities: &[City],
    flows: &[CityFlow],
    assignment: &Assignment,
    slot: usize,
    policy: AttachmentPolicy,
    min_elevation_deg: f64,
) -> Result<SlotTrafficReport, TrafficError> {
    let n_slots = ctx.n_slots();
    if slot >= n_slots {
        return Err(TrafficError::SlotOutOfRange { slot, n_slots });
    }
    if !(0.0..90.0).contains(&min_elevation_deg) {
        return Err(TrafficError::BadElevation(min_elevation_deg));
    }
    for f in flows {
        if f.src >= cities.len() {
            return Err(TrafficError::UnknownCity(f.src));
        }
        if f.dst >= cities.len() {
            return Err(TrafficError::UnknownCity(f.dst));
        }
        if !f.volume_bps.is_finite() || f.volume_bps <= 0.0 {
            return Err(TrafficError::BadVolume(f.volume_bps));
        }
    }

    let t_abs = ctx.candidates.grid.absolute_s(slot);
    let positions: Vec<[f64; 3]> = cities.iter().map(|c| c.position_km(t_abs)).collect();
    let best_a: Vec<Option<(usize, f64)>> = positions
        .iter()
        .map(|p| best_in_layer(&ctx.eph_a, p, slot, min_elevation_deg))
        .collect();
    let best_b: Vec<Option<(usize, f64)>> = positions
        .iter()
        .map(|p| best_in_layer(&ctx.eph_b, p, slot, min_elevation_deg))
        .collect();

    let supra = ctx.supra_with(&assignment.pairs)?;
    let node_a = |flat: usize| supra.offsets[0] + flat;
    let node_b = |flat: usize| supra.offsets[1] + flat;

    // Access node of one endpoint under the any-layer policy.
    let closest = |city: usize| -> Option<usize> {
        match (best_a[city], best_b[city]) {
            (Some((fa, da)), Some((fb, db))) => {
                // Ties go to the lower layer for determinism.
                Some(if da <= db { node_a(fa) } else { node_b(fb) })
            }
            (Some((fa, _)), None) => Some(node_a(fa)),
            (None, Some((fb, _))) => Some(node_b(fb)),
            (None, None) => None,
        }
    };

    let mut trees: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    let mut routed = Vec::new();
    let mut unserved = 0usize;
    let mut link_load: BTreeMap<(SatelliteId, SatelliteId), f64> = BTreeMap::new();
    let mut total_hops = 0usize;
    let mut total_volume = 0.0;

    for f in flows {
        let endpoints = match policy {
            AttachmentPolicy::AnyLayer => closest(f.src).zip(closest(f.dst)),
            AttachmentPolicy::SingleLayerPerFlow => {
                let in_a = best_a[f.src].zip(best_a[f.dst]);
                let in_b = best_b[f.src].zip(best_b[f.dst]);
                match (in_a, in_b) {
                    (Some(((sa, dsa), (ta, dta))), Some(((sb, dsb), (tb, dtb)))) => {
                        if dsa + dta <= dsb + dtb {
                            Some((node_a(sa), node_a(ta)))
                        } else {
                            Some((node_b(sb), node_b(tb)))
                        }
                    }
                    (Some(((sa, _), (ta, _))), None) => Some((node_a(sa), node_a(ta))),
                    (None, Some(((sb, _), (tb, _)))) => Some((node_b(sb), node_b(tb))),
                    (None, None) => None,
                }
            }
        };
        let Some((src_node, dst_node)) = endpoints else {
            unserved += 1;
            continue;
        };
        let parent = trees
            .entry(src_node)
            .or_insert_with(|| bfs_parents(&supra, src_node));
        if parent[dst_node] == u32::MAX {
            unserved += 1;
            continue;
        }
        let mut path = vec![dst_node];
        while *path.last().unwrap() != src_node {
            path.push(parent[*path.last().unwrap()] as usize);
        }
        let hops = path.len() - 1;
        for w in path.windows(2) {
            let u = id_of_node(ctx, w[0]);
            let v = id_of_node(ctx, w[1]);
            let key = (u.min(v), u.max(v));
            *link_load.entry(key).or_insert(0.0) += f.volume_bps;
        }
        total_hops += hops;
        total_volume += f.volume_bps;
        routed.push(RoutedFlow {
            flow: *f,
            src_sat: id_of_node(ctx, src_node),
            dst_sat: id_of_node(ctx, dst_node),
            hops,
        });
    }

    let mean_hops = if routed.is_empty() {
        0.0
    } else {
        total_hops as f64 / routed.len() as f64
    };
    Ok(SlotTrafficReport {
        slot,
        served_flows: routed.len(),
        unserved_flows: unserved,
        mean_hops,
        total_throughput_bps: total_volume,
        link_load,
        routed,
    })
}
