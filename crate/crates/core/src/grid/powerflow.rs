//! Newton–Raphson power flow in polar form.
//!
//! One slack bus, all other buses PQ. Solved from a flat start with the full
//! Jacobian rebuilt and LU-factorized each iteration; networks here are small
//! (a few hundred buses at most) so a dense Jacobian is the simple and fast
//! choice.

use nalgebra::{DMatrix, DVector};

use crate::{CoreError, Result};

use super::GridNetwork;

/// Convergence target on the worst bus power mismatch [pu].
pub const PF_TOL: f64 = 1e-11;
/// Iteration cap for one solve.
pub const PF_MAX_ITER: usize = 20;

/// Converged operating point.
#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    /// Voltage magnitude per bus [pu].
    pub vm: Vec<f64>,
    /// Voltage angle per bus [rad].
    pub va: Vec<f64>,
    /// Apparent power entering each line at its from end [kVA].
    pub flow_from_kva: Vec<f64>,
    /// Total active loss [kW], from the bus-injection balance.
    pub p_loss_kw: f64,
    /// Total active loss [kW], summed per line as |I|²R.
    pub p_loss_lines_kw: f64,
    /// Final worst mismatch [pu].
    pub mismatch: f64,
    pub iterations: usize,
}

/// Dense bus admittance matrix (real and imaginary parts).
pub(crate) struct YBus {
    pub g: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

pub(crate) fn build_ybus(grid: &GridNetwork) -> YBus {
    let n = grid.n_buses();
    let mut g = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for l in &grid.lines {
        let f = grid.bus_index(l.from).unwrap();
        let t = grid.bus_index(l.to).unwrap();
        let d = l.r_pu * l.r_pu + l.x_pu * l.x_pu;
        let gl = l.r_pu / d;
        let bl = -l.x_pu / d;
        g[(f, f)] += gl;
        g[(t, t)] += gl;
        g[(f, t)] -= gl;
        g[(t, f)] -= gl;
        b[(f, f)] += bl;
        b[(t, t)] += bl;
        b[(f, t)] -= bl;
        b[(t, f)] -= bl;
    }
    YBus { g, b }
}

/// Computed injections P_i(V, θ), Q_i(V, θ) at every bus.
pub(crate) fn injections(y: &YBus, vm: &[f64], va: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = vm.len();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let mut pi = 0.0;
        let mut qi = 0.0;
        for j in 0..n {
            let gij = y.g[(i, j)];
            let bij = y.b[(i, j)];
            if gij == 0.0 && bij == 0.0 {
                continue;
            }
            let th = va[i] - va[j];
            let (s, c) = th.sin_cos();
            pi += vm[j] * (gij * c + bij * s);
            qi += vm[j] * (gij * s - bij * c);
        }
        p[i] = vm[i] * pi;
        q[i] = vm[i] * qi;
    }
    (p, q)
}

/// Power-flow Jacobian over the non-slack state [θ_ns..., V_ns...], rows
/// [ΔP_ns..., ΔQ_ns...]. `ns` maps compact indices to bus indices.
pub(crate) fn jacobian(
    y: &YBus,
    vm: &[f64],
    va: &[f64],
    p: &[f64],
    q: &[f64],
    ns: &[usize],
) -> DMatrix<f64> {
    let r = ns.len();
    let mut jac = DMatrix::zeros(2 * r, 2 * r);
    for (a, &i) in ns.iter().enumerate() {
        for (b, &j) in ns.iter().enumerate() {
            let gij = y.g[(i, j)];
            let bij = y.b[(i, j)];
            if i == j {
                jac[(a, b)] = -q[i] - bij * vm[i] * vm[i];
                jac[(a, r + b)] = p[i] / vm[i] + gij * vm[i];
                jac[(r + a, b)] = p[i] - gij * vm[i] * vm[i];
                jac[(r + a, r + b)] = q[i] / vm[i] - bij * vm[i];
            } else {
                if gij == 0.0 && bij == 0.0 {
                    continue;
                }
                let th = va[i] - va[j];
                let (s, c) = th.sin_cos();
                jac[(a, b)] = vm[i] * vm[j] * (gij * s - bij * c);
                jac[(a, r + b)] = vm[i] * (gij * c + bij * s);
                jac[(r + a, b)] = -vm[i] * vm[j] * (gij * c + bij * s);
                jac[(r + a, r + b)] = vm[i] * (gij * s - bij * c);
            }
        }
    }
    jac
}

/// Solves the power flow for given per-bus injections (positive =
/// generation) in per-unit.
pub fn solve_injected(grid: &GridNetwork, p_inj: &[f64], q_inj: &[f64]) -> Result<PowerFlowSolution> {
    let n = grid.n_buses();
    let slack = grid.slack_index();
    let y = build_ybus(grid);
    let ns: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let r = ns.len();

    let mut vm = vec![1.0; n];
    let mut va = vec![0.0; n];
    let mut mismatch = f64::INFINITY;
    let mut iterations = 0;

    for it in 0..=PF_MAX_ITER {
        let (p, q) = injections(&y, &vm, &va);
        let mut f = DVector::zeros(2 * r);
        for (a, &i) in ns.iter().enumerate() {
            f[a] = p_inj[i] - p[i];
            f[r + a] = q_inj[i] - q[i];
        }
        mismatch = f.amax();
        iterations = it;
        if mismatch <= PF_TOL {
            let (flow_from_kva, p_loss_lines_kw) = line_flows(grid, &y, &vm, &va);
            let p_loss_pu: f64 = p.iter().sum();
            return Ok(PowerFlowSolution {
                vm,
                va,
                flow_from_kva,
                p_loss_kw: p_loss_pu * grid.s_base_kva,
                p_loss_lines_kw,
                mismatch,
                iterations,
            });
        }
        if it == PF_MAX_ITER {
            break;
        }
        let jac = jacobian(&y, &vm, &va, &p, &q, &ns);
        let lu = jac.lu();
        let dx = lu
            .solve(&f)
            .ok_or(CoreError::SingularJacobian { step: 0 })?;
        if !dx.iter().all(|v| v.is_finite()) {
            return Err(CoreError::PowerFlowDiverged { mismatch, iterations: it });
        }
        for (a, &i) in ns.iter().enumerate() {
            va[i] += dx[a];
            vm[i] += dx[r + a];
            if vm[i] <= 1e-6 {
                // Collapsed voltage: treat as divergence.
                return Err(CoreError::PowerFlowDiverged { mismatch, iterations: it });
            }
        }
    }
    Err(CoreError::PowerFlowDiverged { mismatch, iterations })
}

/// Runs the power flow at step `k` of the forecast, with optional extra
/// station injections [kW]/[kvar] per bus (positive = generation).
pub fn run_power_flow(
    grid: &GridNetwork,
    k: usize,
    extra_p_kw: Option<&[f64]>,
    extra_q_kvar: Option<&[f64]>,
) -> Result<PowerFlowSolution> {
    let n = grid.n_buses();
    let mut p_inj = vec![0.0; n];
    let mut q_inj = vec![0.0; n];
    for i in 0..n {
        let (pl, ql) = grid.load_pu(i, k);
        p_inj[i] = -pl;
        q_inj[i] = -ql;
        if let Some(ep) = extra_p_kw {
            p_inj[i] += ep[i] / grid.s_base_kva;
        }
        if let Some(eq) = extra_q_kvar {
            q_inj[i] += eq[i] / grid.s_base_kva;
        }
    }
    solve_injected(grid, &p_inj, &q_inj)
}

/// Apparent from-end flows [kVA] and total line loss [kW].
fn line_flows(grid: &GridNetwork, y: &YBus, vm: &[f64], va: &[f64]) -> (Vec<f64>, f64) {
    let _ = y;
    let mut flows = Vec::with_capacity(grid.lines.len());
    let mut loss_pu = 0.0;
    for l in &grid.lines {
        let f = grid.bus_index(l.from).unwrap();
        let t = grid.bus_index(l.to).unwrap();
        let (pf, qf, i2) = from_end_flow(l.r_pu, l.x_pu, vm[f], va[f], vm[t], va[t]);
        flows.push((pf * pf + qf * qf).sqrt() * grid.s_base_kva);
        loss_pu += i2 * l.r_pu;
    }
    (flows, loss_pu * grid.s_base_kva)
}

/// From-end P, Q and squared current magnitude of a series branch.
pub(crate) fn from_end_flow(
    r_pu: f64,
    x_pu: f64,
    vmf: f64,
    vaf: f64,
    vmt: f64,
    vat: f64,
) -> (f64, f64, f64) {
    let d = r_pu * r_pu + x_pu * x_pu;
    let g = r_pu / d;
    let b = -x_pu / d;
    let th = vaf - vat;
    let (s, c) = th.sin_cos();
    let pf = g * vmf * vmf - vmf * vmt * (g * c + b * s);
    let qf = -b * vmf * vmf + vmf * vmt * (b * c - g * s);
    // |I|^2 = |V_f - V_t|^2 / |z|^2
    let dv2 = vmf * vmf + vmt * vmt - 2.0 * vmf * vmt * c;
    (pf, qf, dv2 / d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Bus, Line};

    fn two_bus_grid(load_kw: f64, load_kvar: f64) -> GridNetwork {
        GridNetwork {
            s_base_kva: 1000.0,
            slack_bus: 1,
            buses: vec![
                Bus { id: 1, base_kv: 11.0, p_load_kw: vec![0.0], q_load_kvar: vec![0.0] },
                Bus { id: 2, base_kv: 11.0, p_load_kw: vec![load_kw], q_load_kvar: vec![load_kvar] },
            ],
            lines: vec![Line { from: 1, to: 2, r_pu: 0.01, x_pu: 0.01, rating_kva: 1000.0 }],
        }
    }

    #[test]
    fn zero_load_gives_flat_voltage_and_no_loss() {
        let grid = two_bus_grid(0.0, 0.0);
        let sol = run_power_flow(&grid, 0, None, None).unwrap();
        assert!(sol.vm.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(sol.va.iter().all(|&a| a.abs() < 1e-12));
        assert!(sol.p_loss_kw.abs() < 1e-9);
        assert!(sol.p_loss_lines_kw.abs() < 1e-9);
    }

    #[test]
    fn two_bus_matches_fixed_point_oracle() {
        // Independent oracle: V2 = V1 - z * conj(S_load / V2), iterated to
        // convergence (Gauss fixed point of the single-line equation).
        let grid = two_bus_grid(100.0, 0.0);
        let (r, x) = (0.01, 0.01);
        let s_load = num_complex(0.1, 0.0);
        let mut v2 = num_complex(1.0, 0.0);
        for _ in 0..200 {
            let i = conj(div(s_load, v2));
            v2 = sub(num_complex(1.0, 0.0), mul(num_complex(r, x), i));
        }
        let vm2_expected = (v2.0 * v2.0 + v2.1 * v2.1).sqrt();
        let i = conj(div(s_load, v2));
        let i2 = i.0 * i.0 + i.1 * i.1;
        let loss_expected_kw = i2 * r * 1000.0;

        let sol = run_power_flow(&grid, 0, None, None).unwrap();
        assert!(sol.mismatch <= 1e-8, "mismatch {}", sol.mismatch);
        assert!(sol.iterations <= 20);
        assert!(
            (sol.vm[1] - vm2_expected).abs() < 1e-8,
            "vm {} vs oracle {}",
            sol.vm[1],
            vm2_expected
        );
        assert!(
            (sol.p_loss_kw - loss_expected_kw).abs() < 1e-6,
            "loss {} vs oracle {}",
            sol.p_loss_kw,
            loss_expected_kw
        );
    }

    #[test]
    fn loss_computed_two_ways_agrees() {
        let grid = two_bus_grid(150.0, 60.0);
        let sol = run_power_flow(&grid, 0, None, None).unwrap();
        let agree = (sol.p_loss_kw - sol.p_loss_lines_kw).abs() / grid.s_base_kva;
        assert!(agree <= 1e-6, "disagreement {agree} pu");
    }

    #[test]
    fn extreme_load_fails_to_converge() {
        // 100x past loadability of a 0.01+0.01j line.
        let grid = two_bus_grid(3_000_000.0, 0.0);
        let err = run_power_flow(&grid, 0, None, None).unwrap_err();
        assert!(matches!(err, CoreError::PowerFlowDiverged { .. }));
    }

    #[test]
    fn injections_offset_load() {
        let grid = two_bus_grid(100.0, 20.0);
        let mut extra_p = vec![0.0; 2];
        let mut extra_q = vec![0.0; 2];
        extra_p[1] = 100.0;
        extra_q[1] = 20.0;
        let sol = run_power_flow(&grid, 0, Some(&extra_p), Some(&extra_q)).unwrap();
        assert!(sol.p_loss_kw.abs() < 1e-9);
        assert!((sol.vm[1] - 1.0).abs() < 1e-10);
    }

    // Tiny complex helpers for the oracle, kept independent of any library.
    fn num_complex(re: f64, im: f64) -> (f64, f64) {
        (re, im)
    }
    fn conj(a: (f64, f64)) -> (f64, f64) {
        (a.0, -a.1)
    }
    fn mul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
    }
    fn div(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        let d = b.0 * b.0 + b.1 * b.1;
        ((a.0 * b.0 + a.1 * b.1) / d, (a.1 * b.0 - a.0 * b.1) / d)
    }
    fn sub(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        (a.0 - b.0, a.1 - b.1)
    }
}
