//! First-order sensitivities of losses, bus voltages and line flows to
//! station power injections, evaluated at the zero-MESD forecast operating
//! point of each step.
//!
//! Column layout of every matrix follows the station-injection vector: two
//! columns per bus, interleaved (P, Q), in bus order — `2·N_V` columns
//! total. Inputs are in kW/kvar (positive = generation at the bus); outputs
//! are kW for losses, pu for voltages and kVA for flows, so the loss and
//! flow sensitivities are dimensionless.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::scenario::{Limits, StationMap};
use crate::{CoreError, Result};

use super::powerflow::{build_ybus, from_end_flow, injections, jacobian, run_power_flow};
use super::GridNetwork;

/// Sensitivities and baseline state for one scheduling step.
#[derive(Debug, Clone)]
pub struct StepSensitivity {
    /// 1 × 2N_V loss row [kW per kW / kvar].
    pub s_ploss: Vec<f64>,
    /// N_V × 2N_V voltage rows [pu per kW / kvar]; slack row all zero.
    pub s_v: Vec<Vec<f64>>,
    /// N_lines × 2N_V from-end apparent-flow rows [kVA per kW / kvar].
    pub s_l: Vec<Vec<f64>>,
    /// Baseline total loss [kW].
    pub p_loss_base_kw: f64,
    /// Baseline voltage magnitudes [pu].
    pub vm_base: Vec<f64>,
    /// Baseline from-end flows [kVA].
    pub flow_base_kva: Vec<f64>,
}

/// Per-step sensitivities plus the shared limit vectors.
#[derive(Debug, Clone)]
pub struct SensitivityBundle {
    pub steps: Vec<StepSensitivity>,
    /// Per-bus voltage increment limits [pu].
    pub dv_max_pu: f64,
    pub dv_min_pu: f64,
    /// Per-line flow increment limit [kVA].
    pub dl_max_kva: Vec<f64>,
}

/// Builds the sensitivity entry for one step.
///
/// The base power flow must converge at the zero-MESD forecast point; the
/// inverse Jacobian then maps bus P/Q injections to state changes, and the
/// loss/flow rows are composed analytically through it.
pub fn sensitivities(grid: &GridNetwork, k: usize) -> Result<StepSensitivity> {
    let base = run_power_flow(grid, k, None, None)?;
    let n = grid.n_buses();
    let slack = grid.slack_index();
    let ns: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let r = ns.len();
    let compact: Vec<Option<usize>> = {
        let mut c = vec![None; n];
        for (a, &i) in ns.iter().enumerate() {
            c[i] = Some(a);
        }
        c
    };

    let y = build_ybus(grid);
    let (p, q) = injections(&y, &base.vm, &base.va);
    let jac = jacobian(&y, &base.vm, &base.va, &p, &q, &ns);
    let lu = jac.lu();

    // Inverse via 2r solves against unit vectors.
    let mut inv = DMatrix::zeros(2 * r, 2 * r);
    for c in 0..2 * r {
        let mut e = DVector::zeros(2 * r);
        e[c] = 1.0;
        let col = lu.solve(&e).ok_or(CoreError::SingularJacobian { step: k })?;
        inv.set_column(c, &col);
    }

    let s_base = grid.s_base_kva;
    let to_col = |bus: usize, reactive: bool| 2 * bus + reactive as usize;

    // Voltage rows: V-state block of the inverse, scaled pu-per-kW.
    let mut s_v = vec![vec![0.0; 2 * n]; n];
    for (a, &i) in ns.iter().enumerate() {
        let row = &mut s_v[i];
        for (b, &j) in ns.iter().enumerate() {
            row[to_col(j, false)] = inv[(r + a, b)] / s_base;
            row[to_col(j, true)] = inv[(r + a, r + b)] / s_base;
        }
    }

    // Loss row: gradient of total computed injection over the non-slack
    // state, composed with the inverse Jacobian.
    let mut g_state = DVector::zeros(2 * r);
    for i in 0..n {
        for (b, &j) in ns.iter().enumerate() {
            let gij = y.g[(i, j)];
            let bij = y.b[(i, j)];
            if i == j {
                g_state[b] += -q[i] - bij * base.vm[i] * base.vm[i];
                g_state[r + b] += p[i] / base.vm[i] + gij * base.vm[i];
            } else {
                if gij == 0.0 && bij == 0.0 {
                    continue;
                }
                let th = base.va[i] - base.va[j];
                let (sn, cs) = th.sin_cos();
                g_state[b] += base.vm[i] * base.vm[j] * (gij * sn - bij * cs);
                g_state[r + b] += base.vm[i] * (gij * cs + bij * sn);
            }
        }
    }
    let gm = inv.transpose() * &g_state; // (g' J^-1)' as a vector
    let mut s_ploss = vec![0.0; 2 * n];
    for (b, &j) in ns.iter().enumerate() {
        s_ploss[to_col(j, false)] = gm[b];
        s_ploss[to_col(j, true)] = gm[r + b];
    }

    // Line-flow rows: d|S_f|/dstate composed with the inverse Jacobian.
    let mut s_l = vec![vec![0.0; 2 * n]; grid.lines.len()];
    for (li, l) in grid.lines.iter().enumerate() {
        let f = grid.bus_index(l.from).unwrap();
        let t = grid.bus_index(l.to).unwrap();
        let (pf, qf, _) = from_end_flow(l.r_pu, l.x_pu, base.vm[f], base.va[f], base.vm[t], base.va[t]);
        let smag = (pf * pf + qf * qf).sqrt().max(1e-8);
        let d = l.r_pu * l.r_pu + l.x_pu * l.x_pu;
        let gl = l.r_pu / d;
        let bl = -l.x_pu / d;
        let th = base.va[f] - base.va[t];
        let (sn, cs) = th.sin_cos();
        let (vf, vt) = (base.vm[f], base.vm[t]);
        // Partials of P_f and Q_f.
        let dp_dvf = 2.0 * gl * vf - vt * (gl * cs + bl * sn);
        let dp_dvt = -vf * (gl * cs + bl * sn);
        let dp_dthf = vf * vt * (gl * sn - bl * cs);
        let dq_dvf = -2.0 * bl * vf + vt * (bl * cs - gl * sn);
        let dq_dvt = vf * (bl * cs - gl * sn);
        let dq_dthf = -vf * vt * (bl * sn + gl * cs);
        // d|S| = (P dP + Q dQ)/|S|
        let ds = |dp: f64, dq: f64| (pf * dp + qf * dq) / smag;
        let mut row_state = DVector::zeros(2 * r);
        if let Some(a) = compact[f] {
            row_state[a] += ds(dp_dthf, dq_dthf);
            row_state[r + a] += ds(dp_dvf, dq_dvf);
        }
        if let Some(a) = compact[t] {
            row_state[a] += ds(-dp_dthf, -dq_dthf);
            row_state[r + a] += ds(dp_dvt, dq_dvt);
        }
        let rm = inv.transpose() * &row_state;
        for (b, &j) in ns.iter().enumerate() {
            s_l[li][to_col(j, false)] = rm[b];
            s_l[li][to_col(j, true)] = rm[r + b];
        }
    }

    Ok(StepSensitivity {
        s_ploss,
        s_v,
        s_l,
        p_loss_base_kw: base.p_loss_kw,
        vm_base: base.vm,
        flow_base_kva: base.flow_from_kva,
    })
}

/// Builds the full bundle over all steps, in parallel when a thread pool is
/// configured (0 = rayon default).
pub fn build_sensitivities(
    grid: &GridNetwork,
    limits: &Limits,
    n_k: usize,
    threads: usize,
) -> Result<SensitivityBundle> {
    let compute = || -> Result<Vec<StepSensitivity>> {
        (0..n_k)
            .into_par_iter()
            .map(|k| sensitivities(grid, k).map_err(|e| lift_step_error(e, k)))
            .collect()
    };
    let steps = if threads == 0 {
        compute()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CoreError::Solver(e.to_string()))?;
        pool.install(compute)?
    };
    Ok(SensitivityBundle {
        steps,
        dv_max_pu: limits.dv_max_pu,
        dv_min_pu: limits.dv_min_pu,
        dl_max_kva: grid.lines.iter().map(|l| l.rating_kva * limits.dl_max_frac).collect(),
    })
}

fn lift_step_error(e: CoreError, k: usize) -> CoreError {
    match e {
        CoreError::SingularJacobian { .. } => CoreError::SingularJacobian { step: k },
        other => other,
    }
}

/// Places per-station P/Q sums at their bus positions in the interleaved
/// 2N_V injection layout.
pub fn station_injection_vector(
    stations: &StationMap,
    grid: &GridNetwork,
    p_station_kw: &[f64],
    q_station_kvar: &[f64],
) -> Vec<f64> {
    let mut x = vec![0.0; 2 * grid.n_buses()];
    for (i, st) in stations.stations.iter().enumerate() {
        let b = grid.bus_index(st.bus).expect("validated station bus");
        x[2 * b] += p_station_kw[i];
        x[2 * b + 1] += q_station_kvar[i];
    }
    x
}

/// Per-step baseline losses and their cost at the given price profile.
#[derive(Debug, Clone)]
pub struct BaselineLosses {
    /// Total active loss per step [kW].
    pub p_loss_kw: Vec<f64>,
    /// Σ_k C^k · P_loss^k · t_unit [currency].
    pub cost: f64,
}

/// Runs the zero-MESD power flow for every step.
pub fn baseline_losses(grid: &GridNetwork, price_per_kwh: &[f64], t_unit_h: f64) -> Result<BaselineLosses> {
    let mut p_loss_kw = Vec::with_capacity(price_per_kwh.len());
    for k in 0..price_per_kwh.len() {
        let sol = run_power_flow(grid, k, None, None)?;
        p_loss_kw.push(sol.p_loss_kw);
    }
    let cost = p_loss_kw
        .iter()
        .zip(price_per_kwh)
        .map(|(&loss, &c)| c * loss * t_unit_h)
        .sum();
    Ok(BaselineLosses { p_loss_kw, cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Bus, Line};
    use crate::scenario::Station;

    /// Small radial feeder: 1 - 2 - 3 - 4 with a lateral 2 - 5. Loaded
    /// heavily enough that a 1 kW probe sits well inside the linear regime
    /// of every branch it touches.
    fn feeder() -> GridNetwork {
        let load = |p: f64, q: f64| (vec![p; 2], vec![q; 2]);
        let (p1, q1) = load(0.0, 0.0);
        let (p2, q2) = load(450.0, 280.0);
        let (p3, q3) = load(600.0, 370.0);
        let (p4, q4) = load(700.0, 500.0);
        let (p5, q5) = load(600.0, 480.0);
        GridNetwork {
            s_base_kva: 1000.0,
            slack_bus: 1,
            buses: vec![
                Bus { id: 1, base_kv: 11.0, p_load_kw: p1, q_load_kvar: q1 },
                Bus { id: 2, base_kv: 11.0, p_load_kw: p2, q_load_kvar: q2 },
                Bus { id: 3, base_kv: 11.0, p_load_kw: p3, q_load_kvar: q3 },
                Bus { id: 4, base_kv: 11.0, p_load_kw: p4, q_load_kvar: q4 },
                Bus { id: 5, base_kv: 11.0, p_load_kw: p5, q_load_kvar: q5 },
            ],
            lines: vec![
                Line { from: 1, to: 2, r_pu: 0.01, x_pu: 0.02, rating_kva: 4000.0 },
                Line { from: 2, to: 3, r_pu: 0.015, x_pu: 0.025, rating_kva: 2500.0 },
                Line { from: 3, to: 4, r_pu: 0.02, x_pu: 0.02, rating_kva: 1200.0 },
                Line { from: 2, to: 5, r_pu: 0.012, x_pu: 0.015, rating_kva: 1200.0 },
            ],
        }
    }

    #[test]
    fn dimensions_are_two_nv() {
        let grid = feeder();
        let s = sensitivities(&grid, 0).unwrap();
        assert_eq!(s.s_ploss.len(), 2 * grid.n_buses());
        assert_eq!(s.s_v.len(), grid.n_buses());
        assert!(s.s_v.iter().all(|r| r.len() == 2 * grid.n_buses()));
        assert_eq!(s.s_l.len(), grid.lines.len());
    }

    #[test]
    fn slack_row_and_columns_are_zero() {
        let grid = feeder();
        let s = sensitivities(&grid, 0).unwrap();
        assert!(s.s_v[0].iter().all(|&v| v == 0.0), "slack voltage is fixed");
        for row in &s.s_v {
            assert_eq!(row[0], 0.0, "slack P column");
            assert_eq!(row[1], 0.0, "slack Q column");
        }
    }

    #[test]
    fn voltage_rises_with_injection_on_passive_feeder() {
        let grid = feeder();
        let s = sensitivities(&grid, 0).unwrap();
        for bus in 1..grid.n_buses() {
            for target in 1..grid.n_buses() {
                assert!(
                    s.s_v[target][2 * bus] >= 0.0,
                    "dV[{target}]/dP[{bus}] = {}",
                    s.s_v[target][2 * bus]
                );
            }
        }
    }

    #[test]
    fn finite_difference_agreement() {
        let grid = feeder();
        let s = sensitivities(&grid, 0).unwrap();
        for &bus in &[1usize, 2, 4] {
            for reactive in [false, true] {
                let mut extra = vec![0.0; grid.n_buses()];
                extra[bus] = 1.0;
                let (ep, eq) = if reactive { (None, Some(&extra[..])) } else { (Some(&extra[..]), None) };
                let sol = run_power_flow(&grid, 0, ep, eq).unwrap();
                let col = 2 * bus + reactive as usize;

                // Loss.
                let true_dloss = sol.p_loss_kw - s.p_loss_base_kw;
                let lin_dloss = s.s_ploss[col];
                assert!(
                    (lin_dloss - true_dloss).abs() / true_dloss.abs().max(1e-12) <= 1e-3,
                    "loss (bus {bus}, reactive {reactive}): lin {lin_dloss} vs true {true_dloss}"
                );

                // Voltages.
                for v in 1..grid.n_buses() {
                    let true_dv = sol.vm[v] - s.vm_base[v];
                    let lin_dv = s.s_v[v][col];
                    assert!(
                        (lin_dv - true_dv).abs() <= 1e-3 * true_dv.abs().max(1e-9),
                        "bus {v}: lin {lin_dv} vs true {true_dv}"
                    );
                }

                // Flows.
                for li in 0..grid.lines.len() {
                    let true_dl = sol.flow_from_kva[li] - s.flow_base_kva[li];
                    let lin_dl = s.s_l[li][col];
                    assert!(
                        (lin_dl - true_dl).abs() <= 1e-3 * true_dl.abs().max(1e-6),
                        "line {li}: lin {lin_dl} vs true {true_dl}"
                    );
                }
            }
        }
    }

    #[test]
    fn halving_the_perturbation_quarters_the_error() {
        let grid = feeder();
        let s = sensitivities(&grid, 0).unwrap();
        let bus = 2usize;
        let err_at = |kw: f64| {
            let mut extra = vec![0.0; grid.n_buses()];
            extra[bus] = kw;
            let sol = run_power_flow(&grid, 0, Some(&extra), None).unwrap();
            let true_dloss = sol.p_loss_kw - s.p_loss_base_kw;
            (s.s_ploss[2 * bus] * kw - true_dloss).abs()
        };
        let e1 = err_at(1.0);
        let e2 = err_at(0.5);
        let ratio = e1 / e2;
        assert!(
            (3.0..=5.0).contains(&ratio),
            "expected near-quadratic shrinkage, got ratio {ratio} ({e1} vs {e2})"
        );
    }

    #[test]
    fn determinism_bitwise() {
        let grid = feeder();
        let a = sensitivities(&grid, 0).unwrap();
        let b = sensitivities(&grid, 0).unwrap();
        assert_eq!(a.s_ploss, b.s_ploss);
        assert_eq!(a.s_v, b.s_v);
        assert_eq!(a.s_l, b.s_l);
    }

    #[test]
    fn injection_vector_layout_and_summation() {
        let grid = feeder();
        let stations = StationMap {
            stations: vec![
                Station { id: 1, intersection: 1, bus: 3 },
                Station { id: 2, intersection: 2, bus: 5 },
            ],
        };
        let x = station_injection_vector(&stations, &grid, &[100.0, -40.0], &[10.0, 5.0]);
        assert_eq!(x.len(), 10);
        assert_eq!(x[4], 100.0); // bus 3 is index 2 -> P at position 4
        assert_eq!(x[5], 10.0);
        assert_eq!(x[8], -40.0); // bus 5 is index 4
        assert_eq!(x[9], 5.0);
        let zeros: f64 = x.iter().enumerate().filter(|&(i, _)| ![4, 5, 8, 9].contains(&i)).map(|(_, v)| v.abs()).sum();
        assert_eq!(zeros, 0.0);

        let zero = station_injection_vector(&stations, &grid, &[0.0, 0.0], &[0.0, 0.0]);
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn baseline_losses_zero_without_load() {
        let mut grid = feeder();
        for b in &mut grid.buses {
            b.p_load_kw = vec![0.0; 2];
            b.q_load_kvar = vec![0.0; 2];
        }
        let base = baseline_losses(&grid, &[0.1, 0.2], 0.5).unwrap();
        assert!(base.p_loss_kw.iter().all(|&v| v.abs() < 1e-9));
        assert!(base.cost.abs() < 1e-9);
    }

    #[test]
    fn doubling_loads_increases_losses() {
        let grid = feeder();
        let base = baseline_losses(&grid, &[0.1, 0.1], 0.5).unwrap();
        let mut heavy = grid.clone();
        for b in &mut heavy.buses {
            for v in b.p_load_kw.iter_mut().chain(b.q_load_kvar.iter_mut()) {
                *v *= 2.0;
            }
        }
        let heavy_losses = baseline_losses(&heavy, &[0.1, 0.1], 0.5).unwrap();
        for (l, h) in base.p_loss_kw.iter().zip(&heavy_losses.p_loss_kw) {
            assert!(h > l);
        }
    }
}
