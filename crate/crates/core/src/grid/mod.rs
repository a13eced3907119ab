//! Balanced positive-sequence distribution-grid model: power flow, baseline
//! losses, linear sensitivities and the station-injection mapping.

mod powerflow;
mod sensitivity;

pub use powerflow::{run_power_flow, PowerFlowSolution};
pub use sensitivity::{
    baseline_losses, build_sensitivities, sensitivities, station_injection_vector, BaselineLosses,
    SensitivityBundle, StepSensitivity,
};

use crate::{CoreError, Result};

/// One grid bus with its per-step net load forecast. Net load means load
/// minus local renewable generation; negative values export power.
#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: u32,
    pub base_kv: f64,
    /// Active net load per step [kW].
    pub p_load_kw: Vec<f64>,
    /// Reactive net load per step [kvar].
    pub q_load_kvar: Vec<f64>,
}

/// A series branch between two buses.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub from: u32,
    pub to: u32,
    pub r_pu: f64,
    pub x_pu: f64,
    pub rating_kva: f64,
}

/// The distribution network in per-unit on `s_base_kva`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridNetwork {
    pub s_base_kva: f64,
    pub slack_bus: u32,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
}

impl GridNetwork {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn slack_index(&self) -> usize {
        self.bus_index(self.slack_bus).expect("validated slack bus")
    }

    /// Net load at `(bus index, step)` in per-unit (positive = consumption).
    pub fn load_pu(&self, bus: usize, k: usize) -> (f64, f64) {
        let b = &self.buses[bus];
        (b.p_load_kw[k] / self.s_base_kva, b.q_load_kvar[k] / self.s_base_kva)
    }

    pub fn validate(&self, n_k: usize) -> Result<()> {
        if self.s_base_kva <= 0.0 {
            return Err(CoreError::validation("grid.s_base_kva", "must be positive"));
        }
        if self.buses.is_empty() {
            return Err(CoreError::validation("grid.buses", "at least one bus required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.buses {
            if !seen.insert(b.id) {
                return Err(CoreError::validation("grid.buses", format!("duplicate bus id {}", b.id)));
            }
            if b.p_load_kw.len() != n_k || b.q_load_kvar.len() != n_k {
                return Err(CoreError::validation(
                    format!("grid.buses (id {})", b.id),
                    format!("load profile must have {n_k} samples"),
                ));
            }
        }
        if self.bus_index(self.slack_bus).is_none() {
            return Err(CoreError::validation(
                "grid.slack_bus",
                format!("slack bus {} does not exist", self.slack_bus),
            ));
        }
        for (idx, l) in self.lines.iter().enumerate() {
            let field = format!("grid.lines[{idx}] ({} -> {})", l.from, l.to);
            if self.bus_index(l.from).is_none() || self.bus_index(l.to).is_none() {
                return Err(CoreError::validation(&field, "endpoint bus does not exist"));
            }
            if l.r_pu == 0.0 && l.x_pu == 0.0 {
                return Err(CoreError::validation(&field, "line impedance must be nonzero"));
            }
            if l.rating_kva <= 0.0 {
                return Err(CoreError::validation(&field, "line rating must be positive"));
            }
        }
        // Connectivity sweep from the slack bus.
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for l in &self.lines {
            let f = self.bus_index(l.from).unwrap();
            let t = self.bus_index(l.to).unwrap();
            adj[f].push(t);
            adj[t].push(f);
        }
        let mut reached = vec![false; n];
        let mut stack = vec![self.slack_index()];
        reached[self.slack_index()] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !reached[v] {
                    reached[v] = true;
                    stack.push(v);
                }
            }
        }
        if let Some(i) = reached.iter().position(|&r| !r) {
            return Err(CoreError::validation(
                format!("grid.buses (id {})", self.buses[i].id),
                "bus is not connected to the slack bus",
            ));
        }
        Ok(())
    }
}
