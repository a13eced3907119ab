//! Problem-instance loading, validation and normalization.
//!
//! A [`Scenario`] is the canonical in-memory form of one problem instance:
//! road network, grid network, station map, MESD fleet, per-step forecast
//! profiles and solver limits. It is immutable after load and safe to share
//! across threads.

mod io;
mod profile;

pub use io::{load_scenario, load_scenario_with, save_scenario, LoadOptions};
pub use profile::{resample_profile, Sample};

use std::collections::BTreeMap;

use crate::grid::GridNetwork;
use crate::transit::RoadNetwork;
use crate::{CoreError, Result};

/// One MESD charging station: a road intersection tied to a grid bus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Station {
    pub id: u32,
    pub intersection: u32,
    pub bus: u32,
}

/// The station set, ordered as in the scenario file. Index in this list is
/// the station index `i` used throughout the model.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StationMap {
    pub stations: Vec<Station>,
}

impl StationMap {
    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    /// Bus id of station `i`.
    pub fn bus(&self, i: usize) -> u32 {
        self.stations[i].bus
    }

    /// Intersection id of station `i`.
    pub fn intersection(&self, i: usize) -> u32 {
        self.stations[i].intersection
    }
}

/// Ratings and efficiencies of one MESD unit.
///
/// Sign convention (global): discharge into the grid is positive, charging
/// draws are negative, so `p_min_kw < 0 < p_max_kw`.
#[derive(Debug, Clone, PartialEq)]
pub struct MesdSpec {
    pub name: String,
    /// Maximum discharge power [kW], > 0.
    pub p_max_kw: f64,
    /// Maximum charge power [kW], < 0.
    pub p_min_kw: f64,
    /// Battery capacity [kWh].
    pub e_cap_kwh: f64,
    /// SOC band and initial SOC, as fractions of capacity.
    pub e_min: f64,
    pub e_max: f64,
    pub e_0: f64,
    /// Maximum |SOC(end) - SOC(start)| over the day.
    pub de_max: f64,
    /// Transit drain [kWh per km driven].
    pub eta_transit_kwh_per_km: f64,
    /// Charging efficiency coefficient in the SOC recursion.
    pub eta_c: f64,
    /// Discharging efficiency coefficient in the SOC recursion.
    pub eta_d: f64,
    /// Minimum power factor of the converter output.
    pub pf_min: f64,
}

impl MesdSpec {
    /// Reactive-power gain `sqrt(1 - pf^2) / pf` from the power-factor band.
    pub fn q_ratio(&self) -> f64 {
        (1.0 - self.pf_min * self.pf_min).sqrt() / self.pf_min
    }

    fn validate(&self, field: &str) -> Result<()> {
        let err = |msg: String| Err(CoreError::validation(field, msg));
        if !(self.p_min_kw < 0.0 && 0.0 < self.p_max_kw) {
            return err(format!(
                "power limits must satisfy p_min < 0 < p_max, got [{}, {}]",
                self.p_min_kw, self.p_max_kw
            ));
        }
        if self.e_cap_kwh <= 0.0 {
            return err(format!("e_cap_kwh must be positive, got {}", self.e_cap_kwh));
        }
        if !(0.0 <= self.e_min && self.e_min < self.e_0 && self.e_0 < self.e_max && self.e_max <= 1.0) {
            return err(format!(
                "SOC fractions must satisfy 0 <= e_min < e_0 < e_max <= 1, got ({}, {}, {})",
                self.e_min, self.e_0, self.e_max
            ));
        }
        if !(self.pf_min > 0.0 && self.pf_min <= 1.0) {
            return err(format!("pf_min must lie in (0, 1], got {}", self.pf_min));
        }
        if self.eta_transit_kwh_per_km <= 0.0 {
            return err(format!(
                "eta_transit_kwh_per_km must be positive, got {}",
                self.eta_transit_kwh_per_km
            ));
        }
        if self.de_max < 0.0 {
            return err(format!("de_max must be non-negative, got {}", self.de_max));
        }
        if self.eta_c <= 0.0 || self.eta_d <= 0.0 {
            return err("efficiency coefficients must be positive".to_string());
        }
        Ok(())
    }
}

/// Incremental grid-operation limits applied to the linearized constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct Limits {
    /// Upper bound on per-bus voltage-magnitude increase [pu].
    pub dv_max_pu: f64,
    /// Lower bound on per-bus voltage-magnitude change [pu] (negative).
    pub dv_min_pu: f64,
    /// Bound on per-line apparent-flow change, as a fraction of line rating.
    pub dl_max_frac: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            dv_max_pu: 0.01,
            dv_min_pu: -0.01,
            dl_max_frac: 0.20,
        }
    }
}

/// Solver and model-shaping options carried by a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Relative MIP gap at which branch-and-bound terminates.
    pub gap: f64,
    /// Node limit for branch-and-bound (0 = unlimited).
    pub node_limit: u64,
    /// Wall-time limit in seconds (0 = unlimited).
    pub time_limit_s: f64,
    /// Optional cap on the number of journeys per MESD over the day.
    pub max_transits: Option<u32>,
    /// Optional pinned start station per MESD index.
    pub pin_start: BTreeMap<usize, u32>,
    /// Drop linearized ΔV/ΔL rows that provably can never bind.
    pub prune_redundant: bool,
    /// Worker threads for per-step precomputation (0 = auto).
    pub threads: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gap: 1e-6,
            node_limit: 0,
            time_limit_s: 0.0,
            max_transits: None,
            pin_start: BTreeMap::new(),
            prune_redundant: true,
            threads: 0,
        }
    }
}

/// A fully validated problem instance.
///
/// All profiles have been resampled to `n_k` samples of `t_unit_h` hours;
/// every cross-reference (station → intersection, station → bus, edge →
/// speed profile) has been resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Scheduling interval length [h].
    pub t_unit_h: f64,
    /// Number of scheduling steps (`n_k * t_unit_h` = horizon, 24 h for
    /// shipped scenarios).
    pub n_k: usize,
    pub road: RoadNetwork,
    pub grid: GridNetwork,
    pub stations: StationMap,
    pub fleet: Vec<MesdSpec>,
    /// Electricity price per step [currency / kWh].
    pub price_per_kwh: Vec<f64>,
    pub limits: Limits,
    pub options: SolverOptions,
}

impl Scenario {
    /// Number of stations `N_I`.
    pub fn n_i(&self) -> usize {
        self.stations.len()
    }

    /// Number of MESD units `N_S`.
    pub fn n_s(&self) -> usize {
        self.fleet.len()
    }

    /// Number of grid buses `N_V`.
    pub fn n_v(&self) -> usize {
        self.grid.buses.len()
    }

    /// Validates every cross-reference and type invariant. Called by the
    /// loader; callers constructing scenarios in code can use it directly.
    pub fn validate(&self) -> Result<()> {
        if self.n_k < 2 {
            return Err(CoreError::validation("meta.n_k", "at least 2 scheduling steps required"));
        }
        if self.t_unit_h <= 0.0 {
            return Err(CoreError::validation("meta.t_unit_h", "t_unit must be positive"));
        }
        if self.price_per_kwh.len() != self.n_k {
            return Err(CoreError::validation(
                "price_profile_id",
                format!("price profile has {} samples, expected {}", self.price_per_kwh.len(), self.n_k),
            ));
        }
        self.road.validate(self.n_k)?;
        self.grid.validate(self.n_k)?;

        let mut seen_buses = std::collections::BTreeSet::new();
        for (idx, st) in self.stations.stations.iter().enumerate() {
            let field = format!("stations[{idx}] (id {})", st.id);
            if !self.road.has_node(st.intersection) {
                return Err(CoreError::validation(
                    &field,
                    format!("references nonexistent intersection {}", st.intersection),
                ));
            }
            if self.grid.bus_index(st.bus).is_none() {
                return Err(CoreError::validation(
                    &field,
                    format!("references nonexistent bus {}", st.bus),
                ));
            }
            if !seen_buses.insert(st.bus) {
                return Err(CoreError::validation(
                    &field,
                    format!("bus {} already hosts another station", st.bus),
                ));
            }
        }
        for (s, spec) in self.fleet.iter().enumerate() {
            spec.validate(&format!("fleet[{s}] ({})", spec.name))?;
        }
        if self.limits.dv_max_pu < 0.0 || self.limits.dv_min_pu > 0.0 || self.limits.dl_max_frac < 0.0 {
            return Err(CoreError::validation(
                "limits",
                "dv_max_pu and dl_max_frac must be >= 0 and dv_min_pu <= 0",
            ));
        }
        for (&s, &station_id) in &self.options.pin_start {
            if s >= self.fleet.len() {
                return Err(CoreError::validation(
                    "options.pin_start",
                    format!("MESD index {s} out of range"),
                ));
            }
            if !self.stations.stations.iter().any(|st| st.id == station_id) {
                return Err(CoreError::validation(
                    "options.pin_start",
                    format!("station id {station_id} does not exist"),
                ));
            }
        }
        Ok(())
    }

    /// Station index (0-based) for a station id.
    pub fn station_index(&self, id: u32) -> Option<usize> {
        self.stations.stations.iter().position(|st| st.id == id)
    }
}
