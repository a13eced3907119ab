//! Scenario file schema and loader.
//!
//! A scenario is a single UTF-8 JSON document. Time series live in a shared
//! `profiles` table and are referenced by id from edges, buses and the price
//! field. A profile is one of:
//!
//! * a bare array of numbers — samples evenly spaced across the horizon,
//!   starting at minute 0;
//! * an array of `[minutes, value]` pairs — explicit timestamps;
//! * `{"csv": "relative/path.csv"}` — a two-column `minutes,value` CSV with
//!   header row, resolved relative to the scenario file.
//!
//! All profiles are resampled to the scheduling grid with previous-value
//! hold at load time.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::profile::{parse_profile_csv, resample_profile, Sample};
use super::{Limits, MesdSpec, Scenario, SolverOptions, Station, StationMap};
use crate::grid::{Bus, GridNetwork, Line};
use crate::transit::{RoadEdge, RoadNetwork};
use crate::{CoreError, Result};

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    meta: MetaSection,
    road: RoadSection,
    grid: GridSection,
    stations: Vec<StationEntry>,
    fleet: Vec<FleetEntry>,
    #[serde(default)]
    profiles: BTreeMap<String, ProfileSpec>,
    price_profile_id: String,
    #[serde(default)]
    limits: LimitsSection,
    #[serde(default)]
    options: OptionsSection,
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaSection {
    #[serde(default)]
    name: String,
    #[serde(default = "default_t_unit")]
    t_unit_h: f64,
    n_k: usize,
}

fn default_t_unit() -> f64 {
    0.25
}

#[derive(Debug, Serialize, Deserialize)]
struct RoadSection {
    intersections: Vec<u32>,
    edges: Vec<EdgeEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeEntry {
    a: u32,
    b: u32,
    length_km: f64,
    speed_profile_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct GridSection {
    s_base_kva: f64,
    slack_bus: u32,
    buses: Vec<BusEntry>,
    lines: Vec<LineEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BusEntry {
    id: u32,
    #[serde(default = "default_base_kv")]
    base_kv: f64,
    #[serde(default)]
    p_load_profile_id: Option<String>,
    #[serde(default)]
    q_load_profile_id: Option<String>,
}

fn default_base_kv() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
struct LineEntry {
    from: u32,
    to: u32,
    r_pu: f64,
    x_pu: f64,
    rating_kva: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct StationEntry {
    id: u32,
    intersection: u32,
    bus: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct FleetEntry {
    #[serde(default)]
    name: String,
    p_max_kw: f64,
    p_min_kw: f64,
    e_cap_kwh: f64,
    e_min: f64,
    e_max: f64,
    e_0: f64,
    de_max: f64,
    eta_transit_kwh_per_km: f64,
    #[serde(default = "default_eta_c")]
    eta_c: f64,
    #[serde(default = "default_eta_d")]
    eta_d: f64,
    pf_min: f64,
}

// Shipped efficiency defaults: 95% of drawn power is stored while charging,
// and delivering 1 kWh drains 1/0.95 kWh while discharging.
fn default_eta_c() -> f64 {
    0.95
}

fn default_eta_d() -> f64 {
    1.0 / 0.95
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ProfileSpec {
    Csv { csv: String },
    Pairs(Vec<[f64; 2]>),
    Values(Vec<f64>),
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct LimitsSection {
    #[serde(default)]
    dv_max_pu: Option<f64>,
    #[serde(default)]
    dv_min_pu: Option<f64>,
    #[serde(default)]
    dl_max_frac: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct OptionsSection {
    #[serde(default)]
    gap: Option<f64>,
    #[serde(default)]
    node_limit: Option<u64>,
    #[serde(default)]
    time_limit_s: Option<f64>,
    #[serde(default)]
    max_transits: Option<u32>,
    #[serde(default)]
    pin_start: BTreeMap<String, u32>,
    #[serde(default)]
    prune_redundant: Option<bool>,
    #[serde(default)]
    threads: Option<usize>,
}

/// Loader overrides applied before profiles are resampled.
#[derive(Debug, Default, Clone)]
pub struct LoadOptions {
    /// Replace the scenario's step count; `t_unit` is rescaled so the
    /// horizon length is preserved.
    pub nk_override: Option<usize>,
}

/// Loads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    load_scenario_with(path, &LoadOptions::default())
}

/// Loads a scenario file with loader overrides.
pub fn load_scenario_with(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::parse(path.display().to_string(), e.to_string()))?;
    let file: ScenarioFile = serde_json::from_str(&text)
        .map_err(|e| CoreError::parse(path.display().to_string(), e.to_string()))?;
    let base_dir = path.parent().map(PathBuf::from).unwrap_or_default();
    build_scenario(file, &base_dir, opts)
}

fn build_scenario(file: ScenarioFile, base_dir: &Path, opts: &LoadOptions) -> Result<Scenario> {
    let horizon_h = file.meta.n_k as f64 * file.meta.t_unit_h;
    let (n_k, t_unit_h) = match opts.nk_override {
        Some(n) if n >= 2 => (n, horizon_h / n as f64),
        Some(n) => {
            return Err(CoreError::validation(
                "nk_override",
                format!("need at least 2 steps, got {n}"),
            ))
        }
        None => (file.meta.n_k, file.meta.t_unit_h),
    };

    let profiles = ProfileTable {
        table: &file.profiles,
        base_dir,
        horizon_min: horizon_h * 60.0,
        t_unit_h,
        n_k,
    };

    let mut edges = Vec::with_capacity(file.road.edges.len());
    for (idx, e) in file.road.edges.iter().enumerate() {
        let speed = profiles.resolve(&e.speed_profile_id, &format!("road.edges[{idx}].speed_profile_id"))?;
        edges.push(RoadEdge {
            a: e.a,
            b: e.b,
            length_km: e.length_km,
            speed_kmh: speed,
        });
    }
    let road = RoadNetwork {
        nodes: file.road.intersections.clone(),
        edges,
    };

    let mut buses = Vec::with_capacity(file.grid.buses.len());
    for (idx, b) in file.grid.buses.iter().enumerate() {
        let p = match &b.p_load_profile_id {
            Some(id) => profiles.resolve(id, &format!("grid.buses[{idx}].p_load_profile_id"))?,
            None => vec![0.0; n_k],
        };
        let q = match &b.q_load_profile_id {
            Some(id) => profiles.resolve(id, &format!("grid.buses[{idx}].q_load_profile_id"))?,
            None => vec![0.0; n_k],
        };
        buses.push(Bus {
            id: b.id,
            base_kv: b.base_kv,
            p_load_kw: p,
            q_load_kvar: q,
        });
    }
    let lines = file
        .grid
        .lines
        .iter()
        .map(|l| Line {
            from: l.from,
            to: l.to,
            r_pu: l.r_pu,
            x_pu: l.x_pu,
            rating_kva: l.rating_kva,
        })
        .collect();
    let grid = GridNetwork {
        s_base_kva: file.grid.s_base_kva,
        slack_bus: file.grid.slack_bus,
        buses,
        lines,
    };

    let stations = StationMap {
        stations: file
            .stations
            .iter()
            .map(|s| Station {
                id: s.id,
                intersection: s.intersection,
                bus: s.bus,
            })
            .collect(),
    };

    let fleet = file
        .fleet
        .iter()
        .enumerate()
        .map(|(s, f)| MesdSpec {
            name: if f.name.is_empty() { format!("mesd{}", s + 1) } else { f.name.clone() },
            p_max_kw: f.p_max_kw,
            p_min_kw: f.p_min_kw,
            e_cap_kwh: f.e_cap_kwh,
            e_min: f.e_min,
            e_max: f.e_max,
            e_0: f.e_0,
            de_max: f.de_max,
            eta_transit_kwh_per_km: f.eta_transit_kwh_per_km,
            eta_c: f.eta_c,
            eta_d: f.eta_d,
            pf_min: f.pf_min,
        })
        .collect();

    let price_per_kwh = profiles.resolve(&file.price_profile_id, "price_profile_id")?;

    let defaults = Limits::default();
    let limits = Limits {
        dv_max_pu: file.limits.dv_max_pu.unwrap_or(defaults.dv_max_pu),
        dv_min_pu: file.limits.dv_min_pu.unwrap_or(defaults.dv_min_pu),
        dl_max_frac: file.limits.dl_max_frac.unwrap_or(defaults.dl_max_frac),
    };

    let dopt = SolverOptions::default();
    let mut pin_start = BTreeMap::new();
    for (key, &station_id) in &file.options.pin_start {
        let s: usize = key.parse().map_err(|_| {
            CoreError::validation("options.pin_start", format!("MESD index `{key}` is not an integer"))
        })?;
        pin_start.insert(s, station_id);
    }
    let options = SolverOptions {
        gap: file.options.gap.unwrap_or(dopt.gap),
        node_limit: file.options.node_limit.unwrap_or(dopt.node_limit),
        time_limit_s: file.options.time_limit_s.unwrap_or(dopt.time_limit_s),
        max_transits: file.options.max_transits,
        pin_start,
        prune_redundant: file.options.prune_redundant.unwrap_or(dopt.prune_redundant),
        threads: file.options.threads.unwrap_or(dopt.threads),
    };

    let scenario = Scenario {
        name: file.meta.name,
        t_unit_h,
        n_k,
        road,
        grid,
        stations,
        fleet,
        price_per_kwh,
        limits,
        options,
    };
    scenario.validate()?;
    Ok(scenario)
}

struct ProfileTable<'a> {
    table: &'a BTreeMap<String, ProfileSpec>,
    base_dir: &'a Path,
    horizon_min: f64,
    t_unit_h: f64,
    n_k: usize,
}

impl ProfileTable<'_> {
    fn resolve(&self, id: &str, field: &str) -> Result<Vec<f64>> {
        let spec = self.table.get(id).ok_or_else(|| {
            CoreError::validation(field, format!("profile id `{id}` not found in profiles table"))
        })?;
        let samples = match spec {
            ProfileSpec::Values(values) => {
                if values.is_empty() {
                    return Err(CoreError::validation(field, format!("profile `{id}` is empty")));
                }
                let spacing = self.horizon_min / values.len() as f64;
                values
                    .iter()
                    .enumerate()
                    .map(|(i, &value)| Sample { minutes: i as f64 * spacing, value })
                    .collect()
            }
            ProfileSpec::Pairs(pairs) => pairs
                .iter()
                .map(|&[minutes, value]| Sample { minutes, value })
                .collect(),
            ProfileSpec::Csv { csv } => {
                let path = self.base_dir.join(csv);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CoreError::parse(path.display().to_string(), e.to_string()))?;
                parse_profile_csv(&text, &path.display().to_string())?
            }
        };
        resample_profile(&samples, self.t_unit_h, self.n_k, field)
    }
}

/// Serializes a scenario back to its canonical single-file form: all
/// profiles inlined as per-step arrays. `load_scenario(save_scenario(s))`
/// reproduces `s` exactly.
pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let text = scenario_to_json(scenario)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Canonical JSON text of a scenario (see [`save_scenario`]).
pub fn scenario_to_json(scenario: &Scenario) -> Result<String> {
    let mut profiles = BTreeMap::new();

    let mut edges = Vec::new();
    for (idx, e) in scenario.road.edges.iter().enumerate() {
        let pid = format!("speed_edge_{idx}");
        profiles.insert(pid.clone(), ProfileSpec::Values(e.speed_kmh.clone()));
        edges.push(EdgeEntry {
            a: e.a,
            b: e.b,
            length_km: e.length_km,
            speed_profile_id: pid,
        });
    }

    let mut buses = Vec::new();
    for b in &scenario.grid.buses {
        let pid = format!("load_p_bus_{}", b.id);
        let qid = format!("load_q_bus_{}", b.id);
        profiles.insert(pid.clone(), ProfileSpec::Values(b.p_load_kw.clone()));
        profiles.insert(qid.clone(), ProfileSpec::Values(b.q_load_kvar.clone()));
        buses.push(BusEntry {
            id: b.id,
            base_kv: b.base_kv,
            p_load_profile_id: Some(pid),
            q_load_profile_id: Some(qid),
        });
    }

    profiles.insert("price".to_string(), ProfileSpec::Values(scenario.price_per_kwh.clone()));

    let file = ScenarioFile {
        meta: MetaSection {
            name: scenario.name.clone(),
            t_unit_h: scenario.t_unit_h,
            n_k: scenario.n_k,
        },
        road: RoadSection {
            intersections: scenario.road.nodes.clone(),
            edges,
        },
        grid: GridSection {
            s_base_kva: scenario.grid.s_base_kva,
            slack_bus: scenario.grid.slack_bus,
            buses,
            lines: scenario
                .grid
                .lines
                .iter()
                .map(|l| LineEntry {
                    from: l.from,
                    to: l.to,
                    r_pu: l.r_pu,
                    x_pu: l.x_pu,
                    rating_kva: l.rating_kva,
                })
                .collect(),
        },
        stations: scenario
            .stations
            .stations
            .iter()
            .map(|s| StationEntry {
                id: s.id,
                intersection: s.intersection,
                bus: s.bus,
            })
            .collect(),
        fleet: scenario
            .fleet
            .iter()
            .map(|f| FleetEntry {
                name: f.name.clone(),
                p_max_kw: f.p_max_kw,
                p_min_kw: f.p_min_kw,
                e_cap_kwh: f.e_cap_kwh,
                e_min: f.e_min,
                e_max: f.e_max,
                e_0: f.e_0,
                de_max: f.de_max,
                eta_transit_kwh_per_km: f.eta_transit_kwh_per_km,
                eta_c: f.eta_c,
                eta_d: f.eta_d,
                pf_min: f.pf_min,
            })
            .collect(),
        profiles,
        price_profile_id: "price".to_string(),
        limits: LimitsSection {
            dv_max_pu: Some(scenario.limits.dv_max_pu),
            dv_min_pu: Some(scenario.limits.dv_min_pu),
            dl_max_frac: Some(scenario.limits.dl_max_frac),
        },
        options: OptionsSection {
            gap: Some(scenario.options.gap),
            node_limit: Some(scenario.options.node_limit),
            time_limit_s: Some(scenario.options.time_limit_s),
            max_transits: scenario.options.max_transits,
            pin_start: scenario
                .options
                .pin_start
                .iter()
                .map(|(&s, &id)| (s.to_string(), id))
                .collect(),
            prune_redundant: Some(scenario.options.prune_redundant),
            threads: Some(scenario.options.threads),
        },
    };
    Ok(serde_json::to_string_pretty(&file)?)
}
