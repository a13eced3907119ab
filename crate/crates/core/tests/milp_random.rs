//! Randomized solver validation against brute-force oracles.
//!
//! LPs are checked against exhaustive vertex enumeration (every basis /
//! bound-pattern combination); MILPs against enumeration of all binary
//! assignments with an LP on the continuous remainder.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mesdopt_core::milp::{solve, solve_lp, LpStatus, MilpModel, Relation, SolveParams};

/// Brute-force LP optimum over a box-bounded model by enumerating candidate
/// vertices: every subset of rows treated as equalities, intersected with
/// every bound pattern of the remaining variables.
///
/// Small sizes only. Returns the best feasible objective, or None when
/// infeasible. All variables must have finite bounds (no unbounded rays).
fn lp_vertex_oracle(model: &MilpModel) -> Option<f64> {
    let n = model.n_vars();
    let m = model.rows.len();
    let mut best: Option<f64> = None;
    let feas_tol = 1e-7;

    // Enumerate subsets of rows active as equalities (size <= n) and
    // complete with bound patterns for the remaining degrees of freedom.
    for active_mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|&i| active_mask >> i & 1 == 1).collect();
        if active.len() > n {
            continue;
        }
        let free_count = n - active.len();
        // Choose which variables sit at bounds (the rest are solved from the
        // active rows).
        for var_mask in 0u32..(1 << n) {
            let at_bound: Vec<usize> = (0..n).filter(|&v| var_mask >> v & 1 == 1).collect();
            if at_bound.len() != free_count {
                continue;
            }
            let solved: Vec<usize> = (0..n).filter(|&v| var_mask >> v & 1 == 0).collect();
            for bound_pat in 0u32..(1 << at_bound.len()) {
                let mut x = vec![0.0; n];
                for (b, &v) in at_bound.iter().enumerate() {
                    x[v] = if bound_pat >> b & 1 == 1 { model.vars[v].ub } else { model.vars[v].lb };
                }
                // Solve the active equalities for the remaining vars by dense
                // Gaussian elimination.
                let k = solved.len();
                if k != active.len() {
                    continue;
                }
                if k > 0 {
                    let mut a = vec![vec![0.0; k + 1]; k];
                    for (r, &row_i) in active.iter().enumerate() {
                        let row = &model.rows[row_i];
                        let mut rhs = row.rhs;
                        for &(v, c) in &row.terms {
                            if let Some(ci) = solved.iter().position(|&sv| sv == v) {
                                a[r][ci] += c;
                            } else {
                                rhs -= c * x[v];
                            }
                        }
                        a[r][k] = rhs;
                    }
                    if !gauss_solve(&mut a) {
                        continue;
                    }
                    for (ci, &v) in solved.iter().enumerate() {
                        x[v] = a[ci][k];
                    }
                }
                // Feasibility.
                let ok_bounds = (0..n).all(|v| {
                    x[v] >= model.vars[v].lb - feas_tol && x[v] <= model.vars[v].ub + feas_tol
                });
                if !ok_bounds {
                    continue;
                }
                let ok_rows = model.rows.iter().all(|row| {
                    let lhs: f64 = row.terms.iter().map(|&(v, c)| c * x[v]).sum();
                    match row.rel {
                        Relation::Le => lhs <= row.rhs + feas_tol,
                        Relation::Ge => lhs >= row.rhs - feas_tol,
                        Relation::Eq => (lhs - row.rhs).abs() <= feas_tol,
                    }
                });
                if !ok_rows {
                    continue;
                }
                let obj = model.objective_value(&x);
                best = Some(match best {
                    Some(b) => b.min(obj),
                    None => obj,
                });
            }
        }
    }
    best
}

fn gauss_solve(a: &mut [Vec<f64>]) -> bool {
    let k = a.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if a[piv][col].abs() < 1e-10 {
            return false;
        }
        a.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=k {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    for r in 0..k {
        a[r][k] /= a[r][r];
    }
    true
}

fn random_lp(rng: &mut ChaCha8Rng, n: usize, m: usize, binaries: usize) -> MilpModel {
    let mut model = MilpModel::new("random");
    for v in 0..n {
        if v < binaries {
            model.add_binary(format!("b{v}"));
        } else {
            let lo: f64 = rng.random_range(-3.0..0.0);
            let hi: f64 = lo + rng.random_range(0.5..4.0);
            model.add_var(format!("x{v}"), lo, hi);
        }
        model.set_objective(v, rng.random_range(-5.0..5.0));
    }
    for r in 0..m {
        let mut terms = Vec::new();
        for v in 0..n {
            if rng.random_range(0.0..1.0) < 0.7 {
                terms.push((v, rng.random_range(-3.0..3.0f64)));
            }
        }
        if terms.is_empty() {
            terms.push((rng.random_range(0..n), 1.0));
        }
        let rel = match rng.random_range(0..3) {
            0 => Relation::Le,
            1 => Relation::Ge,
            _ => Relation::Eq,
        };
        let rhs = rng.random_range(-3.0..3.0);
        model.add_row(format!("r{r}"), terms, rel, rhs);
    }
    model
}

#[test]
fn lp_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut feasible = 0;
    for case in 0..300 {
        let n = rng.random_range(2..5);
        let m = rng.random_range(1..4);
        let model = random_lp(&mut rng, n, m, 0);
        let oracle = lp_vertex_oracle(&model);
        let got = solve_lp(&model).unwrap();
        match oracle {
            Some(best) => {
                assert_eq!(got.status, LpStatus::Optimal, "case {case}: oracle feasible ({best})");
                assert!(
                    (got.objective - best).abs() <= 1e-6 * (1.0 + best.abs()),
                    "case {case}: simplex {} vs oracle {best}",
                    got.objective
                );
                feasible += 1;
            }
            None => {
                assert_eq!(got.status, LpStatus::Infeasible, "case {case}: oracle infeasible");
            }
        }
    }
    assert!(feasible > 50, "generator degenerated: only {feasible} feasible LPs");
}

/// Brute force over binary assignments with an LP on the continuous part.
fn milp_brute_force(model: &MilpModel) -> Option<f64> {
    let binaries: Vec<usize> = (0..model.n_vars()).filter(|&v| model.vars[v].binary).collect();
    let mut best: Option<f64> = None;
    for mask in 0u64..(1 << binaries.len()) {
        let mut fixed = model.clone();
        for (b, &v) in binaries.iter().enumerate() {
            fixed.fix_var(v, (mask >> b & 1) as f64);
        }
        let out = solve_lp(&fixed).unwrap();
        if out.status == LpStatus::Optimal {
            best = Some(match best {
                Some(b) => b.min(out.objective),
                None => out.objective,
            });
        }
    }
    best
}

#[test]
fn branch_and_bound_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut feasible = 0;
    for case in 0..200 {
        let binaries = rng.random_range(2..=9);
        let cont = rng.random_range(0..=4);
        let m = rng.random_range(1..=6);
        let model = random_lp(&mut rng, binaries + cont, m, binaries);
        let oracle = milp_brute_force(&model);
        let got = solve(&model, &SolveParams::default()).unwrap();
        match oracle {
            Some(best) => {
                assert!(
                    got.has_incumbent(),
                    "case {case}: oracle found {best}, solver says {:?}",
                    got.status
                );
                assert!(
                    (got.objective - best).abs() <= 1e-6 * (1.0 + best.abs()),
                    "case {case}: bnb {} vs brute force {best}",
                    got.objective
                );
                feasible += 1;
            }
            None => {
                assert!(!got.has_incumbent(), "case {case}: oracle infeasible, bnb found {}", got.objective);
            }
        }
    }
    assert!(feasible > 40, "generator degenerated: only {feasible} feasible MILPs");
}
