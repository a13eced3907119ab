//! Independent verification of schedules.
//!
//! Nothing here reuses the MILP's sensitivity matrices: realized losses,
//! voltages and flows come from full AC power flows per step, the SOC series
//! is re-integrated from the decoded powers, and trajectories are replayed
//! through the journey state machine. The linearized-vs-AC discrepancy is
//! reported, not hard-failed; only the configured incremental voltage/flow
//! limits fail a schedule, with a relative slack for first-order error
//! (zero slack in strict mode).

mod transit;

pub use transit::{
    check_transit_feasibility, enumerate_row_solutions, enumerate_trajectories, TransitAssignment,
    TransitViolation,
};

use rayon::prelude::*;

use crate::grid::run_power_flow;
use crate::scenario::{MesdSpec, Scenario};
use crate::scheduler::{Position, Schedule};
use crate::Result;

/// Fraction of a limit that AC replay may overshoot before it counts as a
/// violation (absorbs first-order modeling error). Strict mode uses zero.
const LIMIT_SLACK_FRAC: f64 = 0.05;

/// One hard violation found during replay.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// What was violated (`"dv_max"`, `"dv_min"`, `"dl_max"`, `"transit"`,
    /// `"soc"`, `"power_flow"`).
    pub constraint: String,
    pub step: usize,
    /// Bus id, line index or unit index, depending on the constraint.
    pub index: usize,
    pub magnitude: f64,
}

/// Full replay result.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// Realized total loss per step [kW] (AC power flow).
    pub p_loss_ac_kw: Vec<f64>,
    /// Linearized prediction per step [kW]: baseline + ΔP_loss.
    pub p_loss_linear_kw: Vec<f64>,
    /// Largest |AC − linearized| loss gap over the day [kW].
    pub max_loss_discrepancy_kw: f64,
    /// Realized total energy loss [kWh]: grid + transit drain.
    pub e_loss_tot_kwh: f64,
    /// Realized cost [currency]: grid loss cost + transit energy cost.
    pub j_realized: f64,
    /// Station-bus voltage metric: per-station RMS over time, averaged over
    /// stations [pu].
    pub v_rms_pu: f64,
    pub violations: Vec<Violation>,
    /// Discrepancy notes (become violations under `strict`).
    pub warnings: Vec<String>,
    pub pass: bool,
}

/// Replays a schedule with full AC power flows and checks the configured
/// limits.
pub fn replay(schedule: &Schedule, scenario: &Scenario, strict: bool) -> Result<ValidationReport> {
    let n_k = scenario.n_k;
    let n_i = scenario.n_i();
    let grid = &scenario.grid;
    let slack_frac = if strict { 0.0 } else { LIMIT_SLACK_FRAC };

    let mut violations = Vec::new();
    let mut warnings = Vec::new();

    // Transit feasibility of every unit.
    for (s, ms) in schedule.per_mesd.iter().enumerate() {
        let asg = ms.transit_assignment(n_i);
        // The state machine needs the path table to check γ gaps.
        let (paths, _) = crate::transit::build_transit_artifacts(
            &scenario.road,
            &scenario.stations,
            n_k,
            scenario.t_unit_h,
        )?;
        if let Err(v) = check_transit_feasibility(&asg, &paths) {
            violations.push(Violation {
                constraint: "transit".to_string(),
                step: v.step,
                index: s,
                magnitude: 1.0,
            });
            warnings.push(format!("unit {s}: {v}"));
        }
    }

    // SOC replay.
    for (s, ms) in schedule.per_mesd.iter().enumerate() {
        let spec = &scenario.fleet[s];
        let (soc, ok) = soc_replay(
            spec,
            scenario.t_unit_h,
            &ms.p_c_kw,
            &ms.p_d_kw,
            &ms.z_km,
        );
        if !ok {
            let step = soc
                .iter()
                .position(|&e| e < spec.e_min - 1e-9 || e > spec.e_max + 1e-9)
                .unwrap_or(n_k - 1);
            violations.push(Violation {
                constraint: "soc".to_string(),
                step,
                index: s,
                magnitude: soc[step],
            });
        }
        let max_diff = soc
            .iter()
            .zip(&ms.soc)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if max_diff > 1e-9 {
            warnings.push(format!(
                "unit {s}: replayed SOC deviates from solver SOC by {max_diff:.3e}"
            ));
        }
    }

    // Per-step AC power flow with station injections. Baselines are re-run
    // here too (without injections) so every realized quantity is AC-exact.
    struct StepReplay {
        loss_kw: f64,
        vm: Vec<f64>,
        vm_base: Vec<f64>,
        flow_kva: Vec<f64>,
        flow_base_kva: Vec<f64>,
        failed: bool,
    }
    let steps: Vec<StepReplay> = (0..n_k)
        .into_par_iter()
        .map(|k| {
            let mut extra_p = vec![0.0; grid.n_buses()];
            let mut extra_q = vec![0.0; grid.n_buses()];
            for ms in &schedule.per_mesd {
                if let Position::Station(i) = ms.position[k] {
                    let b = grid.bus_index(scenario.stations.bus(i)).unwrap();
                    extra_p[b] += ms.p_kw[k];
                    extra_q[b] += ms.q_kvar[k];
                }
            }
            let base = run_power_flow(grid, k, None, None);
            let with = run_power_flow(grid, k, Some(&extra_p), Some(&extra_q));
            match (base, with) {
                (Ok(base), Ok(with)) => StepReplay {
                    loss_kw: with.p_loss_kw,
                    vm: with.vm,
                    vm_base: base.vm,
                    flow_kva: with.flow_from_kva,
                    flow_base_kva: base.flow_from_kva,
                    failed: false,
                },
                _ => StepReplay {
                    loss_kw: f64::NAN,
                    vm: Vec::new(),
                    vm_base: Vec::new(),
                    flow_kva: Vec::new(),
                    flow_base_kva: Vec::new(),
                    failed: true,
                },
            }
        })
        .collect();

    let mut p_loss_ac_kw = Vec::with_capacity(n_k);
    let mut p_loss_linear_kw = Vec::with_capacity(n_k);
    let mut max_loss_discrepancy_kw = 0.0f64;
    let mut station_sq_sum = vec![0.0f64; n_i];

    let dv_slack = slack_frac * scenario.limits.dv_max_pu.abs().max(scenario.limits.dv_min_pu.abs());
    for (k, step) in steps.iter().enumerate() {
        if step.failed {
            violations.push(Violation {
                constraint: "power_flow".to_string(),
                step: k,
                index: 0,
                magnitude: f64::INFINITY,
            });
            p_loss_ac_kw.push(f64::NAN);
            p_loss_linear_kw.push(f64::NAN);
            continue;
        }
        p_loss_ac_kw.push(step.loss_kw);
        let lin = schedule
            .dp_loss_kw
            .get(k)
            .copied()
            .unwrap_or(0.0);
        // Linearized prediction = AC baseline + linear increment.
        let base_loss = {
            // Baseline loss from the same AC run family: recompute from the
            // base flow voltages is already folded in; use slack balance.
            // The base solution's loss was not stored; derive from flows.
            // Simpler: re-derive via energy balance on the stored arrays is
            // not possible, so re-run cheaply here.
            run_power_flow(grid, k, None, None).map(|s| s.p_loss_kw).unwrap_or(f64::NAN)
        };
        let linear = base_loss + lin;
        p_loss_linear_kw.push(linear);
        max_loss_discrepancy_kw = max_loss_discrepancy_kw.max((step.loss_kw - linear).abs());

        // Voltage increments vs limits.
        for (b, (&v, &v0)) in step.vm.iter().zip(&step.vm_base).enumerate() {
            let dv = v - v0;
            if dv > scenario.limits.dv_max_pu + dv_slack {
                violations.push(Violation {
                    constraint: "dv_max".to_string(),
                    step: k,
                    index: grid.buses[b].id as usize,
                    magnitude: dv,
                });
            }
            if dv < scenario.limits.dv_min_pu - dv_slack {
                violations.push(Violation {
                    constraint: "dv_min".to_string(),
                    step: k,
                    index: grid.buses[b].id as usize,
                    magnitude: dv,
                });
            }
        }
        // Flow increments vs limits.
        for (l, (&f, &f0)) in step.flow_kva.iter().zip(&step.flow_base_kva).enumerate() {
            let dl = (f - f0).abs();
            let limit = scenario.grid.lines[l].rating_kva * scenario.limits.dl_max_frac;
            if dl > limit * (1.0 + slack_frac) {
                violations.push(Violation {
                    constraint: "dl_max".to_string(),
                    step: k,
                    index: l,
                    magnitude: dl,
                });
            }
        }
        // Station-bus voltages for the RMS metric.
        for i in 0..n_i {
            let b = grid.bus_index(scenario.stations.bus(i)).unwrap();
            station_sq_sum[i] += step.vm[b] * step.vm[b];
        }
    }

    // Realized totals.
    let t = scenario.t_unit_h;
    let grid_kwh: f64 = p_loss_ac_kw.iter().filter(|v| v.is_finite()).map(|&p| p * t).sum();
    let mut transit_kwh = 0.0;
    let mut transit_cost = 0.0;
    for (s, ms) in schedule.per_mesd.iter().enumerate() {
        let eta = scenario.fleet[s].eta_transit_kwh_per_km;
        for d in &ms.departures {
            transit_kwh += eta * d.dist_km;
            transit_cost += eta * scenario.price_per_kwh[d.k] * d.dist_km;
        }
    }
    let grid_cost: f64 = p_loss_ac_kw
        .iter()
        .zip(&scenario.price_per_kwh)
        .filter(|(v, _)| v.is_finite())
        .map(|(&p, &c)| c * p * t)
        .sum();

    let v_rms_pu = if n_i > 0 {
        station_sq_sum
            .iter()
            .map(|&sq| (sq / n_k as f64).sqrt())
            .sum::<f64>()
            / n_i as f64
    } else {
        f64::NAN
    };

    if strict {
        for w in &warnings {
            violations.push(Violation {
                constraint: format!("strict: {w}"),
                step: 0,
                index: 0,
                magnitude: 0.0,
            });
        }
    }
    let pass = violations.is_empty();
    Ok(ValidationReport {
        p_loss_ac_kw,
        p_loss_linear_kw,
        max_loss_discrepancy_kw,
        e_loss_tot_kwh: grid_kwh + transit_kwh,
        j_realized: grid_cost + transit_cost,
        v_rms_pu,
        violations,
        warnings,
        pass,
    })
}

/// Forward-integrates the SOC recursion from the initial level and checks
/// the band and terminal constraints. Returns the series and a pass flag.
pub fn soc_replay(
    spec: &MesdSpec,
    t_unit_h: f64,
    p_c_kw: &[f64],
    p_d_kw: &[f64],
    z_km: &[f64],
) -> (Vec<f64>, bool) {
    let n_k = p_c_kw.len();
    let mut soc = Vec::with_capacity(n_k);
    let mut e = spec.e_0;
    let mut ok = true;
    for k in 0..n_k {
        let de = (spec.eta_c * p_c_kw[k] + spec.eta_d * p_d_kw[k]) * t_unit_h / spec.e_cap_kwh
            + spec.eta_transit_kwh_per_km * z_km[k] / spec.e_cap_kwh;
        e -= de;
        soc.push(e);
        if e < spec.e_min - 1e-9 || e > spec.e_max + 1e-9 {
            ok = false;
        }
    }
    if let Some(&last) = soc.last() {
        if (last - spec.e_0).abs() > spec.de_max + 1e-9 {
            ok = false;
        }
    }
    (soc, ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> MesdSpec {
        MesdSpec {
            name: "m1".into(),
            p_max_kw: 500.0,
            p_min_kw: -500.0,
            e_cap_kwh: 5000.0,
            e_min: 0.2,
            e_max: 0.9,
            e_0: 0.7,
            de_max: 0.3,
            eta_transit_kwh_per_km: 0.5,
            eta_c: 0.9,
            eta_d: 1.0 / 0.9,
            pf_min: 0.95,
        }
    }

    #[test]
    fn charging_raises_soc_by_eta_scaled_energy() {
        // -400 kW for 0.25 h at eta_c = 0.9 into 5000 kWh: +1.8 points.
        let (soc, ok) = soc_replay(&spec(), 0.25, &[-400.0], &[0.0], &[0.0]);
        assert!(ok);
        assert!((soc[0] - (0.7 + 0.018)).abs() < 1e-12);
    }

    #[test]
    fn transit_drains_soc_by_distance() {
        // 4.5 km at 0.5 kWh/km out of 5000 kWh: -0.045 percentage points
        // as a fraction: 2.25 / 5000 = 0.00045.
        let (soc, ok) = soc_replay(&spec(), 0.25, &[0.0], &[0.0], &[4.5]);
        assert!(ok);
        assert!((soc[0] - (0.7 - 0.00045)).abs() < 1e-12);
    }

    #[test]
    fn band_violation_fails() {
        // Discharge hard enough to cross e_min.
        let p_d = vec![500.0; 30];
        let (soc, ok) = soc_replay(&spec(), 1.0, &vec![0.0; 30], &p_d, &vec![0.0; 30]);
        assert!(!ok);
        assert!(soc.iter().any(|&e| e < 0.2));
    }
}
