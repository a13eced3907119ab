//! Assembly of the co-optimization MILP and decoding of its solutions.
//!
//! The model minimizes the day's incremental loss cost plus transit energy
//! cost: power-gating rows tie station powers to the connection flags,
//! charge/discharge split and power-factor rows shape the converter output,
//! the SOC recursion couples power and driven distance into stored energy,
//! and the grid-sensitivity rows keep incremental voltage and flow changes
//! inside their limits.

mod assemble;
mod cases;

pub use assemble::{assemble, AssembleMode, AssembledModel, DispatchVars};
pub use cases::{
    random_feasible_transit, run_mode, solve_case1, solve_case2_stationary, solve_case3_pev,
    zero_output_schedule, CaseResult, Precomputed, CASE3_SEED,
};

use crate::milp::{MilpSolution, SolveStatus};
use crate::scenario::Scenario;
use crate::transit::PathTable;
use crate::validator::TransitAssignment;
use crate::{CoreError, Result};

/// Where one MESD is at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    Station(usize),
    Transit,
}

impl Position {
    pub fn station(&self) -> Option<usize> {
        match self {
            Position::Station(i) => Some(*i),
            Position::Transit => None,
        }
    }
}

/// A completed journey of one MESD.
#[derive(Debug, Clone, PartialEq)]
pub struct Departure {
    pub k: usize,
    pub from: usize,
    pub to: usize,
    pub gamma: u32,
    pub dist_km: f64,
}

/// Decoded per-unit trajectory and dispatch.
#[derive(Debug, Clone, PartialEq)]
pub struct MesdSchedule {
    pub position: Vec<Position>,
    pub departures: Vec<Departure>,
    /// Discharge-mode flag per step.
    pub w: Vec<bool>,
    /// Moving flag per step.
    pub y: Vec<bool>,
    /// Distance driven per step [km].
    pub z_km: Vec<f64>,
    /// Net active power at the connected station [kW] (0 in transit).
    pub p_kw: Vec<f64>,
    /// Reactive power [kvar].
    pub q_kvar: Vec<f64>,
    /// Charging component (≤ 0) [kW].
    pub p_c_kw: Vec<f64>,
    /// Discharging component (≥ 0) [kW].
    pub p_d_kw: Vec<f64>,
    /// SOC fraction after each step.
    pub soc: Vec<f64>,
}

impl MesdSchedule {
    pub fn transit_assignment(&self, n_i: usize) -> TransitAssignment {
        let n_k = self.position.len();
        let mut asg = TransitAssignment::empty(n_i, n_k);
        for (k, pos) in self.position.iter().enumerate() {
            match pos {
                Position::Station(i) => asg.set_station(k, *i),
                Position::Transit => asg.y[k] = true,
            }
        }
        for d in &self.departures {
            asg.set_departure(d.k, d.from, d.to);
        }
        asg
    }
}

/// Deterministic solver statistics (wall time excluded on purpose).
#[derive(Debug, Clone, PartialEq)]
pub struct SolverStats {
    pub status: SolveStatus,
    pub nodes: u64,
    pub simplex_iterations: u64,
    pub gap: f64,
}

/// A decoded day-ahead schedule with its cost breakdown.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub n_k: usize,
    pub t_unit_h: f64,
    pub per_mesd: Vec<MesdSchedule>,
    /// Linearized incremental loss per step [kW].
    pub dp_loss_kw: Vec<f64>,
    /// Linearized bus-voltage increments per step [pu].
    pub dv_pu: Vec<Vec<f64>>,
    /// Linearized line-flow increments per step [kVA].
    pub dl_kva: Vec<Vec<f64>>,
    /// Model objective: loss term + transit term [currency].
    pub objective: f64,
    /// Σ_k C^k · P_loss,base^k · t_unit [currency].
    pub baseline_cost: f64,
    /// Loss term of the objective [currency].
    pub loss_term: f64,
    /// Transit term of the objective [currency].
    pub transit_term: f64,
    /// Linearized total cost: baseline + objective [currency].
    pub j_total: f64,
    /// Linearized total energy loss [kWh]: grid (baseline + increment) plus
    /// transit drain.
    pub e_loss_tot_kwh: f64,
    pub solver: SolverStats,
}

impl Schedule {
    /// Journey count per unit.
    pub fn e_counts(&self) -> Vec<usize> {
        self.per_mesd.iter().map(|m| m.departures.len()).collect()
    }

    /// An all-parked zero-power schedule (the no-fleet degenerate case).
    pub fn empty(scenario: &Scenario, baseline_cost: f64, e_loss_base_kwh: f64) -> Schedule {
        Schedule {
            n_k: scenario.n_k,
            t_unit_h: scenario.t_unit_h,
            per_mesd: Vec::new(),
            dp_loss_kw: vec![0.0; scenario.n_k],
            dv_pu: vec![vec![0.0; scenario.n_v()]; scenario.n_k],
            dl_kva: vec![vec![0.0; scenario.grid.lines.len()]; scenario.n_k],
            objective: 0.0,
            baseline_cost,
            loss_term: 0.0,
            transit_term: 0.0,
            j_total: baseline_cost,
            e_loss_tot_kwh: e_loss_base_kwh,
            solver: SolverStats {
                status: SolveStatus::Optimal,
                nodes: 0,
                simplex_iterations: 0,
                gap: 0.0,
            },
        }
    }
}

/// Maximum distance of a decoded binary from an integer.
const DECODE_INT_TOL: f64 = 1e-6;

/// Decodes a MILP solution into a [`Schedule`] and re-verifies every
/// schedule invariant. Violations signal a formulation bug, not bad input,
/// so they surface as internal-consistency errors.
pub fn decode(
    solution: &MilpSolution,
    scenario: &Scenario,
    paths: &PathTable,
    assembled: &AssembledModel,
    baseline: &crate::grid::BaselineLosses,
    bundle: &crate::grid::SensitivityBundle,
) -> Result<Schedule> {
    if !solution.has_incumbent() {
        return Err(CoreError::Solver(format!(
            "no incumbent to decode (status {})",
            solution.status.as_str()
        )));
    }
    let x = &solution.values;
    let n_i = scenario.n_i();
    let n_k = scenario.n_k;
    let n_s = scenario.n_s();
    let vars = &assembled.vars;
    let layout = vars.layout;

    let as_bool = |v: f64, what: &str| -> Result<bool> {
        if (v - v.round()).abs() > DECODE_INT_TOL || !(v.round() == 0.0 || v.round() == 1.0) {
            return Err(CoreError::InternalConsistency(format!(
                "{what} has non-binary value {v}"
            )));
        }
        Ok(v.round() == 1.0)
    };

    let mut per_mesd = Vec::with_capacity(n_s);
    for s in 0..n_s {
        let spec = &scenario.fleet[s];
        let mut position = Vec::with_capacity(n_k);
        let mut departures = Vec::new();
        let mut w = Vec::with_capacity(n_k);
        let mut y = Vec::with_capacity(n_k);
        let mut z_km = Vec::with_capacity(n_k);
        let mut p_kw = vec![0.0; n_k];
        let mut q_kvar = vec![0.0; n_k];
        let mut p_c_kw = vec![0.0; n_k];
        let mut p_d_kw = vec![0.0; n_k];
        let mut soc = Vec::with_capacity(n_k);

        for k in 0..n_k {
            let mut here = None;
            for i in 0..n_i {
                if as_bool(x[layout.m(s, i, k)], &layout.var_name(layout.m(s, i, k)))? {
                    if here.is_some() {
                        return Err(CoreError::InternalConsistency(format!(
                            "unit {s} connected to two stations at step {k}"
                        )));
                    }
                    here = Some(i);
                }
            }
            let moving = as_bool(x[layout.y(s, k)], &layout.var_name(layout.y(s, k)))?;
            if moving == here.is_some() {
                return Err(CoreError::InternalConsistency(format!(
                    "presence flags inconsistent at step {k} for unit {s}"
                )));
            }
            position.push(match here {
                Some(i) => Position::Station(i),
                None => Position::Transit,
            });
            y.push(moving);
            w.push(as_bool(x[vars.w(s, k)], "w")?);
            z_km.push(x[layout.z(s, k)]);
            soc.push(x[vars.soc(s, k)]);

            for i in 0..n_i {
                let (p, q) = (x[vars.p(s, i, k)], x[vars.q(s, i, k)]);
                let (pc, pd) = (x[vars.pc(s, i, k)], x[vars.pd(s, i, k)]);
                if here == Some(i) {
                    p_kw[k] = p;
                    q_kvar[k] = q;
                    p_c_kw[k] = pc;
                    p_d_kw[k] = pd;
                } else if p.abs() > 1e-6 || q.abs() > 1e-6 || pc.abs() > 1e-6 || pd.abs() > 1e-6 {
                    return Err(CoreError::InternalConsistency(format!(
                        "unit {s} has power at station {i} while not connected (step {k})"
                    )));
                }
            }
            // Mode exclusivity.
            if p_c_kw[k] < -1e-6 && p_d_kw[k] > 1e-6 {
                return Err(CoreError::InternalConsistency(format!(
                    "unit {s} charges and discharges simultaneously at step {k}"
                )));
            }
            for (i, j) in (0..n_i).flat_map(|i| (0..n_i).filter(move |&j| j != i).map(move |j| (i, j))) {
                if as_bool(x[layout.e(s, i, j, k)], "e")? {
                    departures.push(Departure {
                        k,
                        from: i,
                        to: j,
                        gamma: paths.gamma(k, i, j),
                        dist_km: paths.dist(k, i, j),
                    });
                }
            }
        }

        // SOC replay against the recursion (decoded powers and distances).
        let mut e_prev = spec.e_0;
        for k in 0..n_k {
            let de = (spec.eta_c * p_c_kw[k] + spec.eta_d * p_d_kw[k]) * scenario.t_unit_h
                / spec.e_cap_kwh
                + spec.eta_transit_kwh_per_km * z_km[k] / spec.e_cap_kwh;
            let e_k = e_prev - de;
            if (e_k - soc[k]).abs() > 1e-9 {
                return Err(CoreError::InternalConsistency(format!(
                    "SOC recursion mismatch at step {k} for unit {s}: replay {e_k} vs solver {}",
                    soc[k]
                )));
            }
            e_prev = e_k;
        }

        per_mesd.push(MesdSchedule {
            position,
            departures,
            w,
            y,
            z_km,
            p_kw,
            q_kvar,
            p_c_kw,
            p_d_kw,
            soc,
        });
    }

    // Per-step linearized grid quantities, recomputed from the injections.
    let mut dp_loss_kw = Vec::with_capacity(n_k);
    let mut dv_pu = Vec::with_capacity(n_k);
    let mut dl_kva = Vec::with_capacity(n_k);
    for k in 0..n_k {
        let mut p_st = vec![0.0; n_i];
        let mut q_st = vec![0.0; n_i];
        for (s, ms) in per_mesd.iter().enumerate() {
            if let Position::Station(i) = ms.position[k] {
                p_st[i] += ms.p_kw[k];
                q_st[i] += ms.q_kvar[k];
            }
            let _ = s;
        }
        let inj = crate::grid::station_injection_vector(&scenario.stations, &scenario.grid, &p_st, &q_st);
        let step = &bundle.steps[k];
        let dot = |row: &[f64]| row.iter().zip(&inj).map(|(a, b)| a * b).sum::<f64>();
        let dpl = dot(&step.s_ploss);
        let model_dpl = x[vars.dploss(k)];
        if (dpl - model_dpl).abs() > 1e-6 * (1.0 + model_dpl.abs()) {
            return Err(CoreError::InternalConsistency(format!(
                "loss increment mismatch at step {k}: {dpl} vs model {model_dpl}"
            )));
        }
        let dv: Vec<f64> = step.s_v.iter().map(|row| dot(row)).collect();
        let dl: Vec<f64> = step.s_l.iter().map(|row| dot(row)).collect();
        for (b, &v) in dv.iter().enumerate() {
            if v > bundle.dv_max_pu + 1e-9 || v < bundle.dv_min_pu - 1e-9 {
                return Err(CoreError::InternalConsistency(format!(
                    "voltage increment {v} pu at bus index {b}, step {k} violates limits"
                )));
            }
        }
        for (l, &v) in dl.iter().enumerate() {
            if v.abs() > bundle.dl_max_kva[l] + 1e-9 {
                return Err(CoreError::InternalConsistency(format!(
                    "flow increment {v} kVA at line {l}, step {k} violates limits"
                )));
            }
        }
        dp_loss_kw.push(dpl);
        dv_pu.push(dv);
        dl_kva.push(dl);
    }

    // Objective decomposition.
    let t = scenario.t_unit_h;
    let loss_term: f64 = dp_loss_kw
        .iter()
        .zip(&scenario.price_per_kwh)
        .map(|(&d, &c)| c * d * t)
        .sum();
    let mut transit_term = 0.0;
    let mut transit_kwh = 0.0;
    for (s, ms) in per_mesd.iter().enumerate() {
        let eta = scenario.fleet[s].eta_transit_kwh_per_km;
        for d in &ms.departures {
            transit_term += eta * scenario.price_per_kwh[d.k] * d.dist_km;
            transit_kwh += eta * d.dist_km;
        }
    }
    let recomposed = loss_term + transit_term;
    if (recomposed - solution.objective).abs() > 1e-9 * (1.0 + solution.objective.abs()) {
        return Err(CoreError::InternalConsistency(format!(
            "objective decomposition mismatch: {recomposed} vs solver {}",
            solution.objective
        )));
    }

    let baseline_cost = baseline.cost;
    let base_kwh: f64 = baseline.p_loss_kw.iter().map(|&p| p * t).sum();
    let incr_kwh: f64 = dp_loss_kw.iter().map(|&d| d * t).sum();

    Ok(Schedule {
        n_k,
        t_unit_h: t,
        per_mesd,
        dp_loss_kw,
        dv_pu,
        dl_kva,
        objective: solution.objective,
        baseline_cost,
        loss_term,
        transit_term,
        j_total: baseline_cost + solution.objective,
        e_loss_tot_kwh: base_kwh + incr_kwh + transit_kwh,
        solver: SolverStats {
            status: solution.status,
            nodes: solution.nodes,
            simplex_iterations: solution.simplex_iterations,
            gap: solution.gap,
        },
    })
}
