//! Branch-and-bound over the binary variables of a [`MilpModel`].
//!
//! Node selection is best-bound (ties to the lower node id), branching picks
//! the most fractional binary (ties to the lowest variable index), children
//! are solved eagerly with a warm start from the parent basis. Everything is
//! deterministic for fixed inputs and options.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::milp::simplex::{simplex_iter_limit, Basis, SimplexProblem, SolveEnd, Solver};
use crate::milp::{MilpModel, MilpSolution, SolveStatus};
use crate::Result;

/// Binary values within this distance of an integer count as integral.
pub const INT_TOL: f64 = 1e-6;
/// A solve that closes the gap to this relative tolerance is "optimal".
const PROOF_GAP: f64 = 1e-6;
/// Open nodes beyond this count are stored without a warm-start basis.
const BASIS_STORE_CAP: usize = 2048;

/// Branch-and-bound termination options.
#[derive(Debug, Clone)]
pub struct SolveParams {
    /// Relative gap at which the search stops (default 1e-6).
    pub gap: f64,
    /// Node limit (0 = unlimited).
    pub node_limit: u64,
    /// Wall-time limit in seconds (0 = unlimited).
    pub time_limit_s: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams { gap: PROOF_GAP, node_limit: 0, time_limit_s: 0.0 }
    }
}

struct Node {
    id: u64,
    bound: f64,
    /// Branch decisions (variable, fixed value) along the path from root.
    fixings: Vec<(usize, f64)>,
    branch_var: usize,
    basis: Option<Basis>,
}

struct HeapKey {
    bound: f64,
    id: u64,
}

impl PartialEq for HeapKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapKey {}
impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: invert so the smallest bound pops first,
        // then the smallest id.
        other.bound.total_cmp(&self.bound).then(other.id.cmp(&self.id))
    }
}

/// Picks the most fractional binary, ties to the lowest index.
fn pick_branch_var(model: &MilpModel, x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (v, var) in model.vars.iter().enumerate() {
        if !var.binary {
            continue;
        }
        let frac = x[v] - x[v].floor();
        let dist = frac.min(1.0 - frac);
        if dist <= INT_TOL {
            continue;
        }
        let score = (frac - 0.5).abs();
        match best {
            Some((_, s)) if s <= score => {}
            _ => best = Some((v, score)),
        }
    }
    best.map(|(v, _)| v)
}

/// Solves a MILP by branch-and-bound on its binary variables.
pub fn solve(model: &MilpModel, params: &SolveParams) -> Result<MilpSolution> {
    let start = Instant::now();
    let prob = SimplexProblem::from_model(model)?;
    let iter_limit = simplex_iter_limit(&prob);
    let n = model.n_vars();

    let mut lb = prob.lb.clone();
    let mut ub = prob.ub.clone();

    let mut nodes: u64 = 0;
    let mut lp_iterations: u64 = 0;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap: BinaryHeap<HeapKey> = BinaryHeap::new();
    let mut store: Vec<Option<Node>> = Vec::new();

    let finish = |status: SolveStatus,
                  incumbent: Option<(f64, Vec<f64>)>,
                  best_bound: f64,
                  nodes: u64,
                  lp_iterations: u64,
                  start: Instant| {
        let (objective, values) = match incumbent {
            Some((obj, x)) => (obj, x),
            None => (f64::INFINITY, Vec::new()),
        };
        let gap = relative_gap(objective, best_bound);
        Ok(MilpSolution {
            status,
            values,
            objective,
            best_bound,
            gap,
            nodes,
            simplex_iterations: lp_iterations,
            wall_seconds: start.elapsed().as_secs_f64(),
        })
    };

    // Evaluates one node: solves its LP and either prunes, records an
    // incumbent, or returns a child to enqueue.
    struct Evaluated {
        bound: f64,
        basis: Basis,
        branch_var: Option<usize>,
        x: Vec<f64>,
    }
    enum NodeOutcome {
        Pruned,
        Unbounded,
        Open(Evaluated),
    }
    let eval_node = |fixings: &[(usize, f64)],
                     warm: Option<&Basis>,
                     incumbent: &Option<(f64, Vec<f64>)>,
                     lb: &mut [f64],
                     ub: &mut [f64],
                     lp_iterations: &mut u64|
     -> Result<NodeOutcome> {
        for &(v, val) in fixings {
            lb[v] = val;
            ub[v] = val;
        }
        // The solver borrows the bound slices; gather everything it produced
        // before restoring them.
        let solved = (|| {
            let mut solver = Solver::new(&prob, lb, ub, warm)?;
            let end = solver.solve(iter_limit)?;
            let extracted = match end {
                SolveEnd::Optimal => Some((solver.full_values(), solver.basis())),
                _ => None,
            };
            Ok::<_, crate::CoreError>((end, solver.iterations, extracted))
        })();
        for &(v, _) in fixings {
            lb[v] = prob.lb[v];
            ub[v] = prob.ub[v];
        }
        let (end, iterations, extracted) = solved?;
        *lp_iterations += iterations;
        match end {
            SolveEnd::Infeasible => Ok(NodeOutcome::Pruned),
            SolveEnd::Unbounded => Ok(NodeOutcome::Unbounded),
            SolveEnd::Optimal => {
                let (full, basis) = extracted.expect("optimal solve yields values");
                let x = full[..n].to_vec();
                let bound = model.objective_value(&x);
                if let Some((inc, _)) = incumbent {
                    if bound >= inc - 1e-9 * (1.0 + inc.abs()) {
                        return Ok(NodeOutcome::Pruned);
                    }
                }
                let branch_var = pick_branch_var(model, &x);
                Ok(NodeOutcome::Open(Evaluated { bound, basis, branch_var, x }))
            }
        }
    };

    // Root node.
    nodes += 1;
    match eval_node(&[], None, &incumbent, &mut lb, &mut ub, &mut lp_iterations)? {
        NodeOutcome::Pruned => {
            return finish(SolveStatus::Infeasible, None, f64::INFINITY, nodes, lp_iterations, start)
        }
        NodeOutcome::Unbounded => {
            let mut sol =
                finish(SolveStatus::Unbounded, None, f64::NEG_INFINITY, nodes, lp_iterations, start)?;
            sol.objective = f64::NEG_INFINITY;
            return Ok(sol);
        }
        NodeOutcome::Open(ev) => match ev.branch_var {
            None => {
                return finish(
                    SolveStatus::Optimal,
                    Some((ev.bound, ev.x)),
                    ev.bound,
                    nodes,
                    lp_iterations,
                    start,
                )
            }
            Some(bv) => {
                let id = 0u64;
                store.push(Some(Node {
                    id,
                    bound: ev.bound,
                    fixings: Vec::new(),
                    branch_var: bv,
                    basis: Some(ev.basis),
                }));
                heap.push(HeapKey { bound: ev.bound, id });
            }
        },
    }

    let mut next_id = 1u64;
    loop {
        // Global bound over open nodes.
        let best_bound = heap.peek().map(|k| k.bound);
        let inc_obj = incumbent.as_ref().map(|(o, _)| *o);

        let Some(bb) = best_bound else {
            // Tree exhausted.
            let status = if incumbent.is_some() { SolveStatus::Optimal } else { SolveStatus::Infeasible };
            let bb = inc_obj.unwrap_or(f64::INFINITY);
            return finish(status, incumbent, bb, nodes, lp_iterations, start);
        };
        if let Some(inc) = inc_obj {
            let gap = relative_gap(inc, bb);
            if gap <= PROOF_GAP {
                return finish(SolveStatus::Optimal, incumbent, bb, nodes, lp_iterations, start);
            }
            if gap <= params.gap {
                return finish(SolveStatus::GapLimit, incumbent, bb, nodes, lp_iterations, start);
            }
        }
        if params.node_limit > 0 && nodes >= params.node_limit {
            return finish(SolveStatus::NodeLimit, incumbent, bb, nodes, lp_iterations, start);
        }
        if params.time_limit_s > 0.0 && start.elapsed().as_secs_f64() >= params.time_limit_s {
            return finish(SolveStatus::TimeLimit, incumbent, bb, nodes, lp_iterations, start);
        }

        let key = heap.pop().unwrap();
        let node = store[key.id as usize].take().expect("open node present");
        // Prune against a possibly-new incumbent.
        if let Some(inc) = inc_obj {
            if node.bound >= inc - 1e-9 * (1.0 + inc.abs()) {
                continue;
            }
        }

        // Expand: two children with the branch variable fixed down/up.
        for &val in &[0.0, 1.0] {
            let mut fixings = node.fixings.clone();
            fixings.push((node.branch_var, val));
            nodes += 1;
            match eval_node(&fixings, node.basis.as_ref(), &incumbent, &mut lb, &mut ub, &mut lp_iterations)? {
                NodeOutcome::Pruned => {}
                NodeOutcome::Unbounded => {
                    // Cannot happen when the root was bounded, but keep the
                    // report honest if it does.
                    return finish(SolveStatus::Unbounded, None, f64::NEG_INFINITY, nodes, lp_iterations, start);
                }
                NodeOutcome::Open(ev) => match ev.branch_var {
                    None => {
                        let better = match &incumbent {
                            Some((inc, _)) => ev.bound < *inc - 1e-12 * (1.0 + inc.abs()),
                            None => true,
                        };
                        if better {
                            incumbent = Some((ev.bound, ev.x));
                        }
                    }
                    Some(bv) => {
                        let id = next_id;
                        next_id += 1;
                        let keep_basis = heap.len() < BASIS_STORE_CAP;
                        store.push(Some(Node {
                            id,
                            bound: ev.bound,
                            fixings,
                            branch_var: bv,
                            basis: keep_basis.then_some(ev.basis),
                        }));
                        heap.push(HeapKey { bound: ev.bound, id });
                    }
                },
            }
        }
    }
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    if !incumbent.is_finite() {
        return f64::INFINITY;
    }
    let denom = incumbent.abs().max(1e-9);
    ((incumbent - bound) / denom).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{MilpModel, Relation};

    fn knapsack_binary() -> MilpModel {
        // min -5 x1 - 4 x2  s.t. 2 x1 + 3 x2 <= 4, x binary.
        // Binary optimum: x = (1, 0), objective -5.
        let mut model = MilpModel::new("knapsack");
        let x1 = model.add_binary("x1");
        let x2 = model.add_binary("x2");
        model.set_objective(x1, -5.0);
        model.set_objective(x2, -4.0);
        model.add_row("cap", vec![(x1, 2.0), (x2, 3.0)], Relation::Le, 4.0);
        model
    }

    #[test]
    fn binary_knapsack_optimum() {
        let sol = solve(&knapsack_binary(), &SolveParams::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.values[0] - 1.0).abs() < 1e-6);
        assert!(sol.values[1].abs() < 1e-6);
        assert!((sol.objective - (-5.0)).abs() < 1e-9);
    }

    #[test]
    fn all_continuous_model_matches_solve_lp() {
        let mut model = MilpModel::new("cont");
        let x = model.add_var("x", 0.0, 4.0);
        let y = model.add_var("y", 0.0, 4.0);
        model.set_objective(x, -1.0);
        model.set_objective(y, -2.0);
        model.add_row("r", vec![(x, 1.0), (y, 1.0)], Relation::Le, 5.0);
        let lp = crate::milp::solve_lp(&model).unwrap();
        let sol = solve(&model, &SolveParams::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.nodes, 1);
        assert!((sol.objective - lp.objective).abs() < 1e-9);
    }

    #[test]
    fn infeasible_binary_model() {
        let mut model = MilpModel::new("infeasible");
        let x = model.add_binary("x");
        let y = model.add_binary("y");
        model.add_row("need2", vec![(x, 1.0), (y, 1.0)], Relation::Ge, 3.0);
        let sol = solve(&model, &SolveParams::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        assert!(!sol.has_incumbent());
    }

    #[test]
    fn determinism_same_nodes_same_values() {
        let model = knapsack_binary();
        let a = solve(&model, &SolveParams::default()).unwrap();
        let b = solve(&model, &SolveParams::default()).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.values, b.values);
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn objective_scaling_keeps_argmin() {
        let base = knapsack_binary();
        let mut scaled = base.clone();
        for c in scaled.objective.iter_mut() {
            *c *= 10.0;
        }
        let a = solve(&base, &SolveParams::default()).unwrap();
        let b = solve(&scaled, &SolveParams::default()).unwrap();
        assert_eq!(a.values.len(), b.values.len());
        for (va, vb) in a.values.iter().zip(&b.values) {
            assert!((va - vb).abs() < 1e-9);
        }
        assert!((b.objective - 10.0 * a.objective).abs() < 1e-9);
    }
}
