//! Scenario schema: TOML sections, defaults, and domain validation with
//! dotted field paths in every error.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mlsatnet::constellation::{preset, TimeGrid, WalkerSpec};
use mlsatnet::linkmodel::RateParams;
use mlsatnet::optimizer::{AssignmentConstraints, FitnessMode, GaConfig};
use mlsatnet::traffic::{self, City, VolumeModel};

use crate::run::Algorithm;
use crate::CliError;

fn bad(field: &str, msg: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        msg: msg.into(),
    }
}

/// One experiment: layer stack, horizon, algorithm, outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Master seed; every random draw in the run derives from it.
    #[serde(default)]
    pub seed: u64,
    /// Artifact directory; `--out` overrides it.
    pub out_dir: Option<String>,
    /// Also render the standard curves as SVG charts.
    #[serde(default)]
    pub svg: bool,
    #[serde(default)]
    pub grid: GridSection,
    /// Bottom-up stack; interfaces couple consecutive entries only.
    pub layers: Vec<LayerSection>,
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub rates: RatesSection,
    pub traffic: Option<TrafficSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub slot_seconds: f64,
    pub n_slots: usize,
    #[serde(default)]
    pub epoch_s: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = TimeGrid::default();
        GridSection {
            slot_seconds: g.slot_seconds,
            n_slots: g.n_slots,
            epoch_s: g.epoch_s,
        }
    }
}

/// Either a bundled preset name or a full explicit Walker spec.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSection {
    pub preset: Option<String>,
    pub name: Option<String>,
    pub planes: Option<usize>,
    pub sats_per_plane: Option<usize>,
    pub phase_factor: Option<usize>,
    pub altitude_km: Option<f64>,
    pub inclination_deg: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub algorithm: String,
    /// Fixed deployment size; mutually exclusive with `k_range`.
    pub k: Option<usize>,
    /// Inclusive sweep bounds.
    pub k_range: Option<[usize; 2]>,
    #[serde(default = "one")]
    pub k_step: usize,
    #[serde(default)]
    pub snapshot_slot: usize,
    #[serde(default = "default_eta1")]
    pub eta1: f64,
    #[serde(default = "default_eta2")]
    pub eta2: f64,
    /// Cap on deployed links touching any single orbit plane.
    pub max_per_plane: Option<usize>,
    /// Matching budget for the exhaustive strategy.
    pub exact_budget: Option<u64>,
    #[serde(default)]
    pub ga: GaSection,
}

fn one() -> usize {
    1
}
fn default_eta1() -> f64 {
    0.1
}
fn default_eta2() -> f64 {
    0.9
}

/// Overrides for the evolutionary search; unset fields keep the library
/// defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaSection {
    pub population: Option<usize>,
    pub clones: Option<usize>,
    pub crossover_prob: Option<f64>,
    pub max_stagnant_iters: Option<usize>,
    pub generation_cap: Option<usize>,
    pub polish_swaps: Option<usize>,
    /// "measured" (exact path lengths) or "analytic" (closed form).
    pub fitness: Option<String>,
}

/// Link-budget overrides; unset fields keep the calibrated defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub bandwidth_hz: Option<f64>,
    pub tx_power_w: Option<f64>,
    pub antenna_gain: Option<f64>,
    pub carrier_hz: Option<f64>,
    pub noise_temp_k: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    /// "builtin" for the bundled hundred-city file, or a CSV path
    /// relative to the config file.
    #[serde(default = "builtin")]
    pub cities: String,
    pub n_flows: usize,
    #[serde(default = "default_min_elevation")]
    pub min_elevation_deg: f64,
    /// Constant per-flow volume; default 10 Mbps.
    pub volume_bps: Option<f64>,
    /// Uniform volume range; set both bounds together.
    pub volume_min_bps: Option<f64>,
    pub volume_max_bps: Option<f64>,
    /// Separate stream for flow generation; defaults to the master seed.
    pub seed: Option<u64>,
}

fn builtin() -> String {
    "builtin".to_string()
}
fn default_min_elevation() -> f64 {
    traffic::DEFAULT_MIN_ELEVATION_DEG
}

/// Fully validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub seed: u64,
    pub svg: bool,
    pub grid: TimeGrid,
    pub specs: Vec<WalkerSpec>,
    pub algorithm: Algorithm,
    pub ks: Vec<usize>,
    pub snapshot_slot: usize,
    pub eta1: f64,
    pub eta2: f64,
    pub constraints: AssignmentConstraints,
    pub exact_budget: Option<u64>,
    pub ga: GaConfig,
    pub rates: RateParams,
    pub traffic: Option<ResolvedTraffic>,
}

#[derive(Debug, Clone)]
pub struct ResolvedTraffic {
    pub cities: Vec<City>,
    pub n_flows: usize,
    pub min_elevation_deg: f64,
    pub volume: VolumeModel,
    pub seed: u64,
}

impl Scenario {
    /// Parses a scenario file; `raw` comes back for manifest hashing.
    pub fn from_path(path: &Path) -> Result<(Scenario, String), CliError> {
        let raw = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let scenario: Scenario = toml::from_str(&raw)?;
        Ok((scenario, raw))
    }

    fn resolve_layer(&self, i: usize) -> Result<WalkerSpec, CliError> {
        let l = &self.layers[i];
        let field = |key: &str| format!("layers[{i}].{key}");
        if let Some(name) = &l.preset {
            let explicit = [
                l.planes.is_some(),
                l.sats_per_plane.is_some(),
                l.phase_factor.is_some(),
                l.altitude_km.is_some(),
                l.inclination_deg.is_some(),
                l.name.is_some(),
            ];
            if explicit.iter().any(|&x| x) {
                return Err(bad(
                    &field("preset"),
                    "preset and explicit layer fields are mutually exclusive",
                ));
            }
            return preset(name).map_err(|e| bad(&field("preset"), e.to_string()));
        }
        let need = |v: Option<usize>, key: &str| {
            v.ok_or_else(|| bad(&field(key), "required unless a preset is named"))
        };
        let needf = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| bad(&field(key), "required unless a preset is named"))
        };
        let planes = need(l.planes, "planes")?;
        let sats_per_plane = need(l.sats_per_plane, "sats_per_plane")?;
        let phase_factor = need(l.phase_factor, "phase_factor")?;
        let altitude_km = needf(l.altitude_km, "altitude_km")?;
        let inclination_deg = needf(l.inclination_deg, "inclination_deg")?;
        if !altitude_km.is_finite() || altitude_km <= 0.0 {
            return Err(bad(
                &field("altitude_km"),
                format!("altitude must be positive, got {altitude_km}"),
            ));
        }
        if !inclination_deg.is_finite() || !(0.0..=180.0).contains(&inclination_deg) {
            return Err(bad(
                &field("inclination_deg"),
                format!("inclination must lie in [0, 180], got {inclination_deg}"),
            ));
        }
        let name = l.name.clone().unwrap_or_else(|| format!("layer{i}"));
        let spec = WalkerSpec::new(
            name,
            planes,
            sats_per_plane,
            phase_factor,
            altitude_km,
            inclination_deg,
        );
        spec.validate()
            .map_err(|e| bad(&format!("layers[{i}]"), e.to_string()))?;
        Ok(spec)
    }

    fn resolve_traffic(&self, config_dir: &Path) -> Result<Option<ResolvedTraffic>, CliError> {
        let Some(t) = &self.traffic else {
            return Ok(None);
        };
        if self.layers.len() != 2 {
            return Err(bad(
                "traffic",
                "traffic replay supports exactly two layers",
            ));
        }
        if t.n_flows == 0 {
            return Err(bad("traffic.n_flows", "need at least one flow"));
        }
        if !(0.0..90.0).contains(&t.min_elevation_deg) {
            return Err(bad(
                "traffic.min_elevation_deg",
                format!("must lie in [0, 90), got {}", t.min_elevation_deg),
            ));
        }
        let volume = match (t.volume_bps, t.volume_min_bps, t.volume_max_bps) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(bad(
                    "traffic.volume_bps",
                    "constant volume and a volume range are mutually exclusive",
                ))
            }
            (_, Some(min_bps), None) | (_, None, Some(min_bps)) => {
                let _ = min_bps;
                return Err(bad(
                    "traffic.volume_min_bps",
                    "set volume_min_bps and volume_max_bps together",
                ));
            }
            (Some(bps), None, None) => VolumeModel::Constant { bps },
            (None, Some(min_bps), Some(max_bps)) => VolumeModel::UniformRange {
                min_bps,
                max_bps,
            },
            (None, None, None) => VolumeModel::default(),
        };
        let cities = if t.cities == "builtin" {
            traffic::builtin_cities()
        } else {
            let path = config_dir.join(&t.cities);
            traffic::load_cities_path(&path)?
        };
        if cities.len() < 2 {
            return Err(bad("traffic.cities", "need at least two cities"));
        }
        Ok(Some(ResolvedTraffic {
            cities,
            n_flows: t.n_flows,
            min_elevation_deg: t.min_elevation_deg,
            volume,
            seed: t.seed.unwrap_or(self.seed),
        }))
    }

    /// Full domain validation; `config_dir` anchors relative data paths.
    pub fn resolve(&self, config_dir: &Path) -> Result<Resolved, CliError> {
        if self.layers.len() < 2 {
            return Err(bad(
                "layers",
                format!("need at least two layers, got {}", self.layers.len()),
            ));
        }
        let specs: Vec<WalkerSpec> = (0..self.layers.len())
            .map(|i| self.resolve_layer(i))
            .collect::<Result<_, _>>()?;

        let g = &self.grid;
        if !g.slot_seconds.is_finite() || g.slot_seconds <= 0.0 {
            return Err(bad(
                "grid.slot_seconds",
                format!("must be positive, got {}", g.slot_seconds),
            ));
        }
        if g.n_slots == 0 {
            return Err(bad("grid.n_slots", "need at least one slot"));
        }
        let grid = TimeGrid {
            epoch_s: g.epoch_s,
            slot_seconds: g.slot_seconds,
            n_slots: g.n_slots,
        };

        let o = &self.optimizer;
        let algorithm: Algorithm = o.algorithm.parse()?;
        let ks: Vec<usize> = match (o.k, o.k_range) {
            (Some(_), Some(_)) => {
                return Err(bad(
                    "optimizer.k",
                    "k and k_range are mutually exclusive",
                ))
            }
            (None, None) => return Err(bad("optimizer.k", "set k or k_range")),
            (Some(k), None) => {
                if k == 0 {
                    return Err(bad("optimizer.k", "need at least one link"));
                }
                vec![k]
            }
            (None, Some([lo, hi])) => {
                if lo == 0 {
                    return Err(bad("optimizer.k_range", "range must start at 1 or above"));
                }
                if lo > hi {
                    return Err(bad(
                        "optimizer.k_range",
                        format!("range [{lo}, {hi}] is empty"),
                    ));
                }
                if o.k_step == 0 {
                    return Err(bad("optimizer.k_step", "step must be at least 1"));
                }
                (lo..=hi).step_by(o.k_step).collect()
            }
        };
        if o.snapshot_slot >= grid.n_slots {
            return Err(bad(
                "optimizer.snapshot_slot",
                format!(
                    "slot {} outside horizon of {} slots",
                    o.snapshot_slot, grid.n_slots
                ),
            ));
        }
        if !(0.0..=1.0).contains(&o.eta1) || !(0.0..=1.0).contains(&o.eta2) || o.eta1 >= o.eta2 {
            return Err(bad(
                "optimizer.eta1",
                format!(
                    "thresholds need 0 <= eta1 < eta2 <= 1, got ({}, {})",
                    o.eta1, o.eta2
                ),
            ));
        }
        if o.max_per_plane == Some(0) {
            return Err(bad("optimizer.max_per_plane", "cap must be at least 1"));
        }

        let mut ga = GaConfig::default();
        let gs = &o.ga;
        if let Some(v) = gs.population {
            if v == 0 {
                return Err(bad("optimizer.ga.population", "need at least one member"));
            }
            ga.population = v;
        }
        if let Some(v) = gs.clones {
            if v == 0 {
                return Err(bad("optimizer.ga.clones", "need at least one clone"));
            }
            ga.clones = v;
        }
        if let Some(v) = gs.crossover_prob {
            if !(0.0..=1.0).contains(&v) {
                return Err(bad(
                    "optimizer.ga.crossover_prob",
                    format!("probability must lie in [0, 1], got {v}"),
                ));
            }
            ga.crossover_prob = v;
        }
        if let Some(v) = gs.max_stagnant_iters {
            ga.max_stagnant_iters = v;
        }
        if let Some(v) = gs.generation_cap {
            ga.generation_cap = v;
        }
        if let Some(v) = gs.polish_swaps {
            ga.polish_swaps = v;
        }
        if let Some(f) = &gs.fitness {
            ga.fitness = match f.as_str() {
                "measured" => FitnessMode::MeasuredBfs,
                "analytic" => FitnessMode::Analytic,
                other => {
                    return Err(bad(
                        "optimizer.ga.fitness",
                        format!("expected \"measured\" or \"analytic\", got {other:?}"),
                    ))
                }
            };
        }

        let mut rates = RateParams::default();
        let rs = &self.rates;
        let set = |v: Option<f64>, key: &str, slot: &mut f64| -> Result<(), CliError> {
            if let Some(x) = v {
                if !x.is_finite() || x <= 0.0 {
                    return Err(bad(
                        &format!("rates.{key}"),
                        format!("must be positive, got {x}"),
                    ));
                }
                *slot = x;
            }
            Ok(())
        };
        set(rs.bandwidth_hz, "bandwidth_hz", &mut rates.bandwidth_hz)?;
        set(rs.tx_power_w, "tx_power_w", &mut rates.tx_power_w)?;
        set(rs.antenna_gain, "antenna_gain", &mut rates.antenna_gain)?;
        set(rs.carrier_hz, "carrier_hz", &mut rates.carrier_hz)?;
        set(rs.noise_temp_k, "noise_temp_k", &mut rates.noise_temp_k)?;

        let traffic = self.resolve_traffic(config_dir)?;

        Ok(Resolved {
            seed: self.seed,
            svg: self.svg,
            grid,
            specs,
            algorithm,
            ks,
            snapshot_slot: o.snapshot_slot,
            eta1: o.eta1,
            eta2: o.eta2,
            constraints: AssignmentConstraints {
                max_per_plane: o.max_per_plane,
            },
            exact_budget: o.exact_budget,
            ga,
            rates,
            traffic,
        })
    }

    /// Command-line overrides, applied before resolution.
    #[allow(clippy::too_many_arguments)]
    pub fn apply_overrides(
        &mut self,
        seed: Option<u64>,
        out: Option<&PathBuf>,
        algorithm: Option<&str>,
        k: Option<usize>,
        k_range: Option<(usize, usize, usize)>,
        slots: Option<usize>,
    ) {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.out_dir = Some(o.display().to_string());
        }
        if let Some(a) = algorithm {
            self.optimizer.algorithm = a.to_string();
        }
        if let Some(k) = k {
            self.optimizer.k = Some(k);
            self.optimizer.k_range = None;
        }
        if let Some((lo, hi, step)) = k_range {
            self.optimizer.k_range = Some([lo, hi]);
            self.optimizer.k_step = step;
            self.optimizer.k = None;
        }
        if let Some(n) = slots {
            self.grid.n_slots = n;
        }
    }
}

/// Parses "A..B" or "A..B:STEP" into inclusive sweep bounds.
pub fn parse_k_range(s: &str) -> Result<(usize, usize, usize), CliError> {
    let err = || bad("--k-range", format!("expected A..B or A..B:STEP, got {s:?}"));
    let (range, step) = match s.split_once(':') {
        Some((r, st)) => (r, st.parse::<usize>().map_err(|_| err())?),
        None => (s, 1),
    };
    let (lo, hi) = range.split_once("..").ok_or_else(err)?;
    let lo = lo.trim().parse::<usize>().map_err(|_| err())?;
    let hi = hi.trim().parse::<usize>().map_err(|_| err())?;
    Ok((lo, hi, step))
}
