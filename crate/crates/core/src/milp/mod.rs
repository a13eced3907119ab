//! Mixed-integer linear programming: model representation, a bounded-variable
//! revised simplex, branch-and-bound and LP-format interchange.
//!
//! The embedded solver targets desk-scale instances (roughly up to a couple
//! thousand binaries) with proven optimality. Larger models can be exported
//! in LP format for an external solver via [`write_lp`].

mod branch_bound;
mod lp_format;
mod simplex;

pub use branch_bound::{solve, SolveParams};
pub use lp_format::{parse_lp, read_lp, write_lp};
pub use simplex::{solve_lp, LpOutcome, LpStatus};

use crate::{CoreError, Result};

/// Variable id inside a [`MilpModel`].
pub type VarId = usize;

/// Constraint sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// A decision variable with bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub binary: bool,
}

/// A sparse constraint row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub rel: Relation,
    pub rhs: f64,
}

/// A minimization MILP.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpModel {
    pub name: String,
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    /// Dense objective coefficients, one per variable.
    pub objective: Vec<f64>,
    /// Constant added to the objective value.
    pub obj_constant: f64,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        MilpModel { name: name.into(), ..Default::default() }
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.binary).count()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lb: f64, ub: f64) -> VarId {
        self.vars.push(Variable { name: name.into(), lb, ub, binary: false });
        self.objective.push(0.0);
        self.vars.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.vars.push(Variable { name: name.into(), lb: 0.0, ub: 1.0, binary: true });
        self.objective.push(0.0);
        self.vars.len() - 1
    }

    pub fn set_objective(&mut self, var: VarId, coef: f64) {
        self.objective[var] = coef;
    }

    pub fn add_objective(&mut self, var: VarId, coef: f64) {
        self.objective[var] += coef;
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        rel: Relation,
        rhs: f64,
    ) {
        self.rows.push(Row { name: name.into(), terms, rel, rhs });
    }

    /// Fixes a variable to a value by collapsing its bounds.
    pub fn fix_var(&mut self, var: VarId, value: f64) {
        self.vars[var].lb = value;
        self.vars[var].ub = value;
    }

    /// Checks structural invariants: unique names, coefficients referencing
    /// declared variables, binaries bounded inside [0, 1], lb ≤ ub.
    pub fn validate(&self) -> Result<()> {
        let mut names = std::collections::HashSet::with_capacity(self.vars.len() + self.rows.len());
        for (id, v) in self.vars.iter().enumerate() {
            if !names.insert(v.name.as_str()) {
                return Err(CoreError::Assembly(format!("duplicate variable name `{}`", v.name)));
            }
            if v.lb > v.ub {
                return Err(CoreError::Assembly(format!(
                    "variable `{}` has empty bound range [{}, {}]",
                    v.name, v.lb, v.ub
                )));
            }
            if v.binary && (v.lb < 0.0 || v.ub > 1.0) {
                return Err(CoreError::Assembly(format!(
                    "binary `{}` must have bounds inside [0, 1]",
                    v.name
                )));
            }
            if v.binary && (!v.lb.is_finite() || !v.ub.is_finite()) {
                return Err(CoreError::Assembly(format!("binary `{}` must have finite bounds", v.name)));
            }
            let _ = id;
        }
        let mut row_names = std::collections::HashSet::with_capacity(self.rows.len());
        for r in &self.rows {
            if !row_names.insert(r.name.as_str()) {
                return Err(CoreError::Assembly(format!("duplicate row name `{}`", r.name)));
            }
            for &(v, c) in &r.terms {
                if v >= self.vars.len() {
                    return Err(CoreError::Assembly(format!(
                        "row `{}` references undeclared variable {v}",
                        r.name
                    )));
                }
                if !c.is_finite() {
                    return Err(CoreError::Assembly(format!(
                        "row `{}` has a non-finite coefficient",
                        r.name
                    )));
                }
            }
        }
        if self.objective.len() != self.vars.len() {
            return Err(CoreError::Assembly("objective length mismatch".into()));
        }
        Ok(())
    }

    /// Objective value of an assignment (includes the constant term).
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj_constant + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Maximum absolute constraint violation of an assignment.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for r in &self.rows {
            let a: f64 = r.terms.iter().map(|&(v, c)| c * x[v]).sum();
            let viol = match r.rel {
                Relation::Le => a - r.rhs,
                Relation::Ge => r.rhs - a,
                Relation::Eq => (a - r.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        for (v, var) in self.vars.iter().enumerate() {
            worst = worst.max(var.lb - x[v]).max(x[v] - var.ub);
        }
        worst
    }
}

/// Termination status of a MILP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Proven optimal (relative gap ≤ 1e-6).
    Optimal,
    Infeasible,
    Unbounded,
    /// Stopped at the configured (relaxed) gap with an incumbent.
    GapLimit,
    /// Node limit reached; best incumbent and bound reported.
    NodeLimit,
    /// Time limit reached; best incumbent and bound reported.
    TimeLimit,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::GapLimit => "gap_limit",
            SolveStatus::NodeLimit => "node_limit",
            SolveStatus::TimeLimit => "time_limit",
        }
    }
}

/// Result of a MILP solve.
#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// Incumbent values (empty when no feasible point was found).
    pub values: Vec<f64>,
    /// Incumbent objective (∞ when no incumbent).
    pub objective: f64,
    /// Best proven lower bound.
    pub best_bound: f64,
    /// Final relative gap.
    pub gap: f64,
    pub nodes: u64,
    pub simplex_iterations: u64,
    /// Wall-clock seconds (informational; excluded from deterministic
    /// artifacts).
    pub wall_seconds: f64,
}

impl MilpSolution {
    pub fn has_incumbent(&self) -> bool {
        !self.values.is_empty()
    }
}

