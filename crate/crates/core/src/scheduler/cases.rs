//! The three scheduling strategies and their shared pipeline.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::{baseline_losses, build_sensitivities, BaselineLosses, SensitivityBundle};
use crate::milp::{solve, MilpSolution, SolveParams};
use crate::scenario::Scenario;
use crate::transit::{build_transit_artifacts, PathTable, TransitMatrix};
use crate::validator::{check_transit_feasibility, TransitAssignment};
use crate::{CoreError, Result};

use super::assemble::{assemble, AssembleMode, AssembledModel};
use super::{decode, Schedule};

/// Everything derivable from the scenario before optimization.
#[derive(Debug, Clone)]
pub struct Precomputed {
    pub paths: PathTable,
    pub tm: TransitMatrix,
    pub bundle: SensitivityBundle,
    pub baseline: BaselineLosses,
}

impl Precomputed {
    pub fn build(scenario: &Scenario) -> Result<Precomputed> {
        let (paths, tm) = build_transit_artifacts(
            &scenario.road,
            &scenario.stations,
            scenario.n_k,
            scenario.t_unit_h,
        )?;
        let bundle = build_sensitivities(
            &scenario.grid,
            &scenario.limits,
            scenario.n_k,
            scenario.options.threads,
        )?;
        let baseline = baseline_losses(&scenario.grid, &scenario.price_per_kwh, scenario.t_unit_h)?;
        Ok(Precomputed { paths, tm, bundle, baseline })
    }
}

/// A solved strategy: the decoded schedule plus raw solver output.
#[derive(Debug, Clone)]
pub struct CaseResult {
    pub schedule: Schedule,
    pub solution: MilpSolution,
    pub assembled: AssembledModel,
}

fn solve_params(scenario: &Scenario) -> SolveParams {
    SolveParams {
        gap: scenario.options.gap,
        node_limit: scenario.options.node_limit,
        time_limit_s: scenario.options.time_limit_s,
    }
}

/// Assembles and solves one mode end to end.
pub fn run_mode(scenario: &Scenario, pre: &Precomputed, mode: &AssembleMode) -> Result<CaseResult> {
    let assembled = assemble(scenario, &pre.bundle, &pre.paths, &pre.tm, mode)?;
    let solution = solve(&assembled.model, &solve_params(scenario))?;
    if !solution.has_incumbent() {
        return Err(CoreError::Solver(format!(
            "solve ended without an incumbent (status {})",
            solution.status.as_str()
        )));
    }
    let schedule = decode(&solution, scenario, &pre.paths, &assembled, &pre.baseline, &pre.bundle)?;
    Ok(CaseResult { schedule, solution, assembled })
}

/// Case 1: co-optimized routing and dispatch.
pub fn solve_case1(scenario: &Scenario, pre: &Precomputed) -> Result<CaseResult> {
    run_mode(scenario, pre, &AssembleMode::Case1)
}

/// Case 2: two-stage stationary storage. Stage 1 picks one station per unit
/// (journeys forbidden, loss term only); stage 2 re-optimizes dispatch with
/// the placement frozen.
pub fn solve_case2_stationary(scenario: &Scenario, pre: &Precomputed) -> Result<CaseResult> {
    let stage1 = run_mode(scenario, pre, &AssembleMode::Case2Placement)?;
    let fixed: Vec<TransitAssignment> = stage1
        .schedule
        .per_mesd
        .iter()
        .map(|m| m.transit_assignment(scenario.n_i()))
        .collect();
    run_mode(scenario, pre, &AssembleMode::FixedTransit(fixed))
}

/// Case 3: dispatch-only with externally fixed (driver-dependent) paths.
/// `fixed = None` uses the shipped seeded generator.
pub fn solve_case3_pev(
    scenario: &Scenario,
    pre: &Precomputed,
    fixed: Option<Vec<TransitAssignment>>,
) -> Result<CaseResult> {
    let fixed = match fixed {
        Some(f) => f,
        None => random_feasible_transit(scenario, &pre.paths, CASE3_SEED),
    };
    for (s, asg) in fixed.iter().enumerate() {
        check_transit_feasibility(asg, &pre.paths).map_err(|v| {
            CoreError::TransitInfeasible(format!("fixed path for unit {s} is not realizable: {v}"))
        })?;
    }
    run_mode(scenario, pre, &AssembleMode::FixedTransit(fixed))
}

/// Seed of the shipped stand-in for forecast driver behavior.
pub const CASE3_SEED: u64 = 42;

/// Generates one feasible trajectory per MESD by walking the journey state
/// machine with a seeded RNG: park a random while, hop to a random reachable
/// station, repeat.
pub fn random_feasible_transit(
    scenario: &Scenario,
    paths: &PathTable,
    seed: u64,
) -> Vec<TransitAssignment> {
    let n_i = scenario.n_i();
    let n_k = scenario.n_k;
    let mut out = Vec::with_capacity(scenario.n_s());
    for s in 0..scenario.n_s() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64));
        let mut asg = TransitAssignment::empty(n_i, n_k);
        let mut pos = match scenario.options.pin_start.get(&s) {
            Some(&id) => scenario.station_index(id).unwrap_or(0),
            None => rng.random_range(0..n_i),
        };
        let cap = scenario.options.max_transits.unwrap_or(u32::MAX);
        let mut journeys = 0u32;
        let mut k = 0usize;
        while k < n_k {
            asg.set_station(k, pos);
            let park = rng.random_range(1..=(n_k / 3).max(2));
            let depart_at = k + park;
            if depart_at >= n_k - 1 || journeys >= cap {
                for t in k + 1..n_k {
                    asg.set_station(t, pos);
                }
                break;
            }
            for t in k + 1..=depart_at {
                asg.set_station(t, pos);
            }
            let targets: Vec<usize> = (0..n_i)
                .filter(|&j| j != pos && paths.journey_fits(depart_at, pos, j))
                .collect();
            if targets.is_empty() {
                for t in depart_at + 1..n_k {
                    asg.set_station(t, pos);
                }
                break;
            }
            let j = targets[rng.random_range(0..targets.len())];
            let gamma = paths.gamma(depart_at, pos, j) as usize;
            asg.set_departure(depart_at, pos, j);
            for t in depart_at + 1..=depart_at + gamma {
                asg.y[t] = true;
            }
            journeys += 1;
            pos = j;
            k = depart_at + gamma + 1;
        }
        out.push(asg);
    }
    out
}

/// The no-fleet reference: linearized total cost with zero MESD output.
pub fn zero_output_schedule(scenario: &Scenario, pre: &Precomputed) -> Schedule {
    let base_kwh: f64 = pre.baseline.p_loss_kw.iter().map(|&p| p * scenario.t_unit_h).sum();
    Schedule::empty(scenario, pre.baseline.cost, base_kwh)
}
