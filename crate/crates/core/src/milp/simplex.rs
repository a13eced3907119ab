//! Bounded-variable revised simplex with a sparse LU basis factorization.
//!
//! The basis inverse is kept implicitly: a Gilbert–Peierls style sparse LU
//! of the basis matrix plus a product-form eta file for pivots since the
//! last refactorization. Feasibility is reached in two tiers: a composite
//! phase (minimizing the total bound violation of the basics, which works
//! from any warm-start basis) under an iteration budget, then a classical
//! artificial-variable phase 1 with a fixed objective as the guaranteed
//! fallback. Pricing is Dantzig with a Bland fallback after a run of
//! degenerate pivots; the ratio test is a Harris two-pass that keeps bound
//! overshoot inside the feasibility tolerance.

use crate::milp::{MilpModel, Relation};
use crate::{CoreError, Result};

/// Feasibility tolerance on (scaled) variable bounds.
const FEAS_TOL: f64 = 1e-9;
/// Reduced-cost tolerance for entering-variable eligibility.
const DUAL_TOL: f64 = 1e-9;
/// Absolute floor on ratio-test pivot magnitudes.
const PIVOT_TOL: f64 = 5e-8;
/// Smallest pivot magnitude accepted during LU factorization.
const LU_PIVOT_TOL: f64 = 1e-11;
/// Steps smaller than this count as degenerate.
const DEGEN_TOL: f64 = 1e-10;
/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_TRIGGER: u32 = 40;
/// Eta-file length between refactorizations.
const REFACTOR_EVERY: usize = 60;

/// LP termination status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of an LP solve over a [`MilpModel`] with integrality relaxed.
#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Values of the model variables (empty unless optimal).
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: u64,
}

/// Variable status relative to the current basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

/// A resumable basis snapshot. Only columns of the original problem appear;
/// artificial columns never survive into a snapshot.
#[derive(Debug, Clone)]
pub struct Basis {
    pub(crate) basic: Vec<u32>,
    pub(crate) state: Vec<VarState>,
}

/// The LP data in computational form: structural columns plus one unit
/// slack column per row, rows scaled by powers of two.
pub(crate) struct SimplexProblem {
    pub m: usize,
    pub n_struct: usize,
    pub n_total: usize,
    col_ptr: Vec<usize>,
    col_rows: Vec<u32>,
    col_vals: Vec<f64>,
    pub cost: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    rhs: Vec<f64>,
}

impl SimplexProblem {
    pub fn from_model(model: &MilpModel) -> Result<SimplexProblem> {
        model.validate()?;
        let m = model.rows.len();
        let n = model.vars.len();
        let n_total = n + m;

        // Power-of-two row equilibration keeps coefficients near unit
        // magnitude without perturbing representable solutions. Slack
        // columns stay exactly 1; the scaled slack value r*s has the same
        // sign range as s, so slack bounds are unchanged.
        let mut row_scale = vec![1.0f64; m];
        for (i, row) in model.rows.iter().enumerate() {
            let mx = row.terms.iter().map(|&(_, c)| c.abs()).fold(0.0f64, f64::max);
            if mx > 0.0 && mx.is_finite() {
                row_scale[i] = (1.0 / mx).log2().round().exp2();
            }
        }

        let mut per_col: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for (i, row) in model.rows.iter().enumerate() {
            for &(v, c) in &row.terms {
                if c != 0.0 {
                    per_col[v].push((i as u32, c * row_scale[i]));
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(n_total + 1);
        let mut col_rows = Vec::new();
        let mut col_vals = Vec::new();
        col_ptr.push(0);
        for col in &mut per_col {
            col.sort_by_key(|&(r, _)| r);
            let mut merged: Vec<(u32, f64)> = Vec::with_capacity(col.len());
            for &(r, v) in col.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == r => last.1 += v,
                    _ => merged.push((r, v)),
                }
            }
            for (r, v) in merged {
                if v != 0.0 {
                    col_rows.push(r);
                    col_vals.push(v);
                }
            }
            col_ptr.push(col_rows.len());
        }
        for i in 0..m {
            col_rows.push(i as u32);
            col_vals.push(1.0);
            col_ptr.push(col_rows.len());
        }

        let mut lb = Vec::with_capacity(n_total);
        let mut ub = Vec::with_capacity(n_total);
        for v in &model.vars {
            lb.push(v.lb);
            ub.push(v.ub);
        }
        for row in &model.rows {
            match row.rel {
                Relation::Le => {
                    lb.push(0.0);
                    ub.push(f64::INFINITY);
                }
                Relation::Ge => {
                    lb.push(f64::NEG_INFINITY);
                    ub.push(0.0);
                }
                Relation::Eq => {
                    lb.push(0.0);
                    ub.push(0.0);
                }
            }
        }

        let mut cost = vec![0.0; n_total];
        cost[..n].copy_from_slice(&model.objective);

        let rhs = model
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.rhs * row_scale[i])
            .collect();

        Ok(SimplexProblem { m, n_struct: n, n_total, col_ptr, col_rows, col_vals, cost, lb, ub, rhs })
    }

    #[inline]
    pub(crate) fn col(&self, j: usize) -> (&[u32], &[f64]) {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        (&self.col_rows[lo..hi], &self.col_vals[lo..hi])
    }

    /// All-slack starting basis.
    pub fn slack_basis(&self) -> Basis {
        let mut state = vec![VarState::AtLower; self.n_total];
        for (j, st) in state.iter_mut().enumerate().take(self.n_struct) {
            *st = if self.lb[j].is_finite() || !self.ub[j].is_finite() {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
        }
        let basic: Vec<u32> = (0..self.m).map(|i| (self.n_struct + i) as u32).collect();
        for &b in &basic {
            state[b as usize] = VarState::Basic;
        }
        Basis { basic, state }
    }
}

/// Sparse LU factors of a basis matrix, with partial pivoting.
struct LuFactors {
    m: usize,
    /// L columns: (original row, multiplier), unit diagonal implicit.
    l_cols: Vec<Vec<(u32, f64)>>,
    /// U columns: (pivot position, value) strictly above the diagonal.
    u_cols: Vec<Vec<(u32, f64)>>,
    u_diag: Vec<f64>,
    row_pos: Vec<u32>,
    pos_row: Vec<u32>,
}

const NO_POS: u32 = u32::MAX;

impl LuFactors {
    /// Factorizes basis columns. Artificial columns (ids >= `n_total`) are
    /// single ±1 entries described by `art_rows`/`art_vals`.
    fn factorize(
        prob: &SimplexProblem,
        art_rows: &[u32],
        art_vals: &[f64],
        basic: &[u32],
    ) -> Option<LuFactors> {
        let m = prob.m;
        let mut lu = LuFactors {
            m,
            l_cols: Vec::with_capacity(m),
            u_cols: Vec::with_capacity(m),
            u_diag: Vec::with_capacity(m),
            row_pos: vec![NO_POS; m],
            pos_row: vec![0; m],
        };
        let mut work = vec![0.0f64; m];
        let mut pattern: Vec<u32> = Vec::with_capacity(m);
        let mut stack: Vec<(u32, usize)> = Vec::new();
        let mut visited = vec![u32::MAX; m];

        for (j, &bj) in basic.iter().enumerate() {
            let bj = bj as usize;
            pattern.clear();
            if bj >= prob.n_total {
                let a = bj - prob.n_total;
                work[art_rows[a] as usize] = art_vals[a];
                pattern.push(art_rows[a]);
            } else {
                let (rows, vals) = prob.col(bj);
                for (&r, &v) in rows.iter().zip(vals) {
                    work[r as usize] = v;
                    pattern.push(r);
                }
            }
            // Symbolic: pivot positions reachable from the column pattern.
            let mut order: Vec<u32> = Vec::new();
            for idx in 0..pattern.len() {
                let r = pattern[idx];
                let p0 = lu.row_pos[r as usize];
                if p0 == NO_POS || visited[p0 as usize] == j as u32 {
                    continue;
                }
                stack.push((p0, 0));
                visited[p0 as usize] = j as u32;
                while let Some(&mut (p, ref mut next)) = stack.last_mut() {
                    let lcol = &lu.l_cols[p as usize];
                    let mut advanced = false;
                    while *next < lcol.len() {
                        let child_row = lcol[*next].0;
                        *next += 1;
                        let q = lu.row_pos[child_row as usize];
                        if q != NO_POS && visited[q as usize] != j as u32 {
                            visited[q as usize] = j as u32;
                            stack.push((q, 0));
                            advanced = true;
                            break;
                        }
                    }
                    if !advanced {
                        let (done, _) = stack.pop().unwrap();
                        order.push(done);
                    }
                }
            }
            order.sort_unstable();
            // Numeric elimination in ascending pivot-position order.
            for &p in &order {
                let pr = lu.pos_row[p as usize] as usize;
                let piv_val = work[pr];
                if piv_val == 0.0 {
                    continue;
                }
                for &(r, lv) in &lu.l_cols[p as usize] {
                    let r = r as usize;
                    if work[r] == 0.0 && !pattern.contains(&(r as u32)) {
                        pattern.push(r as u32);
                    }
                    work[r] -= lv * piv_val;
                }
            }
            // Pivot: largest |value| among non-pivotal rows.
            let mut piv_row = usize::MAX;
            let mut piv_abs = 0.0f64;
            for &r in &pattern {
                let r = r as usize;
                if lu.row_pos[r] == NO_POS {
                    let a = work[r].abs();
                    if a > piv_abs {
                        piv_abs = a;
                        piv_row = r;
                    }
                }
            }
            if piv_row == usize::MAX || piv_abs < LU_PIVOT_TOL {
                for &r in &pattern {
                    work[r as usize] = 0.0;
                }
                return None;
            }
            let diag = work[piv_row];
            let mut ucol = Vec::new();
            let mut lcol = Vec::new();
            for &r in &pattern {
                let r = r as usize;
                let v = work[r];
                work[r] = 0.0;
                if v == 0.0 {
                    continue;
                }
                let p = lu.row_pos[r];
                if p != NO_POS {
                    ucol.push((p, v));
                } else if r != piv_row {
                    lcol.push((r as u32, v / diag));
                }
            }
            ucol.sort_unstable_by_key(|&(p, _)| p);
            lu.row_pos[piv_row] = j as u32;
            lu.pos_row[j] = piv_row as u32;
            lu.u_diag.push(diag);
            lu.u_cols.push(ucol);
            lu.l_cols.push(lcol);
        }
        Some(lu)
    }

    /// Solves `B x = v`; `v` indexed by original row, result by basis slot.
    fn ftran(&self, v: &mut [f64]) {
        for p in 0..self.m {
            let val = v[self.pos_row[p] as usize];
            if val != 0.0 {
                for &(r, lv) in &self.l_cols[p] {
                    v[r as usize] -= lv * val;
                }
            }
        }
        let mut y: Vec<f64> = (0..self.m).map(|p| v[self.pos_row[p] as usize]).collect();
        for q in (0..self.m).rev() {
            let xq = y[q] / self.u_diag[q];
            y[q] = xq;
            if xq != 0.0 {
                for &(p, uv) in &self.u_cols[q] {
                    y[p as usize] -= uv * xq;
                }
            }
        }
        v[..self.m].copy_from_slice(&y);
    }

    /// Solves `Bᵀ y = c`; `c` indexed by basis slot, result by original row.
    fn btran(&self, c: &mut [f64]) {
        let m = self.m;
        let mut z = vec![0.0f64; m];
        for q in 0..m {
            let mut acc = c[q];
            for &(p, uv) in &self.u_cols[q] {
                acc -= uv * z[p as usize];
            }
            z[q] = acc / self.u_diag[q];
        }
        for p in (0..m).rev() {
            let mut acc = z[p];
            for &(r, lv) in &self.l_cols[p] {
                let q = self.row_pos[r as usize];
                acc -= lv * z[q as usize];
            }
            z[p] = acc;
        }
        for p in 0..m {
            c[self.pos_row[p] as usize] = z[p];
        }
    }
}

/// A product-form eta: basis slot `slot` was replaced; `col` is the FTRAN'd
/// entering column at pivot time (slot entry excluded).
struct Eta {
    slot: u32,
    pivot: f64,
    col: Vec<(u32, f64)>,
}

/// Cost regime of one simplex phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Minimize the total bound violation of the basics (costs recomputed
    /// each iteration; used for warm starts under an iteration budget).
    Composite,
    /// Minimize the sum of active artificial variables (fixed costs).
    Artificial,
    /// Minimize the problem objective.
    Objective,
}

enum PhaseEnd {
    Optimal,
    Infeasible,
    Unbounded,
    /// The basis had to be rebuilt from slacks mid-phase; the caller must
    /// restart feasibility work.
    Restarted,
}

pub(crate) enum SolveEnd {
    Optimal,
    Infeasible,
    Unbounded,
}

pub(crate) struct Solver<'a> {
    prob: &'a SimplexProblem,
    /// Bounds over problem columns plus artificials.
    lb: Vec<f64>,
    ub: Vec<f64>,
    /// Artificial columns: one ±1 entry per row, id = n_total + row.
    art_rows: Vec<u32>,
    art_vals: Vec<f64>,
    n_cols: usize,
    lu: Option<LuFactors>,
    etas: Vec<Eta>,
    pub basic: Vec<u32>,
    pub state: Vec<VarState>,
    xb: Vec<f64>,
    pub iterations: u64,
    degenerate_run: u32,
    bland: bool,
    flips_since_refresh: u32,
}

impl<'a> Solver<'a> {
    pub fn new(
        prob: &'a SimplexProblem,
        node_lb: &[f64],
        node_ub: &[f64],
        warm: Option<&Basis>,
    ) -> Result<Solver<'a>> {
        let m = prob.m;
        let mut lb = node_lb.to_vec();
        let mut ub = node_ub.to_vec();
        // Artificial slots exist for every row but start disabled ([0, 0]).
        lb.extend(std::iter::repeat(0.0).take(m));
        ub.extend(std::iter::repeat(0.0).take(m));
        let basis = match warm {
            Some(b) if b.basic.len() == m && b.state.len() == prob.n_total => b.clone(),
            _ => prob.slack_basis(),
        };
        let mut state = basis.state;
        state.extend(std::iter::repeat(VarState::AtLower).take(m));
        let mut solver = Solver {
            prob,
            lb,
            ub,
            art_rows: (0..m as u32).collect(),
            art_vals: vec![1.0; m],
            n_cols: prob.n_total + m,
            lu: None,
            etas: Vec::new(),
            basic: basis.basic,
            state,
            xb: vec![0.0; m],
            iterations: 0,
            degenerate_run: 0,
            bland: false,
            flips_since_refresh: 0,
        };
        solver.normalize_states();
        if !solver.refactorize() {
            solver.reset_to_slack_basis()?;
        }
        Ok(solver)
    }

    fn reset_to_slack_basis(&mut self) -> Result<()> {
        let b = self.prob.slack_basis();
        self.basic = b.basic;
        for j in 0..self.prob.n_total {
            self.state[j] = b.state[j];
        }
        for j in self.prob.n_total..self.n_cols {
            self.state[j] = VarState::AtLower;
        }
        self.normalize_states();
        if !self.refactorize() {
            return Err(CoreError::Solver("singular slack basis (internal error)".into()));
        }
        Ok(())
    }

    #[inline]
    fn column(&self, j: usize) -> (&[u32], &[f64]) {
        if j < self.prob.n_total {
            self.prob.col(j)
        } else {
            let a = j - self.prob.n_total;
            (
                std::slice::from_ref(&self.art_rows[a]),
                std::slice::from_ref(&self.art_vals[a]),
            )
        }
    }

    /// Clamps nonbasic states onto finite bounds (bound sets change between
    /// branch-and-bound nodes).
    fn normalize_states(&mut self) {
        for j in 0..self.n_cols {
            match self.state[j] {
                VarState::Basic => {}
                VarState::AtUpper if self.ub[j].is_finite() => {}
                VarState::AtUpper => self.state[j] = VarState::AtLower,
                VarState::AtLower if self.lb[j].is_finite() || !self.ub[j].is_finite() => {}
                VarState::AtLower => self.state[j] = VarState::AtUpper,
            }
        }
    }

    #[inline]
    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => {
                if self.lb[j].is_finite() {
                    self.lb[j]
                } else {
                    0.0
                }
            }
            VarState::AtUpper => self.ub[j],
            VarState::Basic => unreachable!("nonbasic_value on basic column"),
        }
    }

    fn refactorize(&mut self) -> bool {
        match LuFactors::factorize(self.prob, &self.art_rows, &self.art_vals, &self.basic) {
            Some(lu) => {
                self.lu = Some(lu);
                self.etas.clear();
                self.flips_since_refresh = 0;
                self.recompute_xb();
                true
            }
            None => false,
        }
    }

    /// Recomputes basic values from scratch: `x_B = B⁻¹ (b − N x_N)`.
    fn recompute_xb(&mut self) {
        let mut v = self.prob.rhs.clone();
        for j in 0..self.n_cols {
            if self.state[j] != VarState::Basic {
                let xj = self.nonbasic_value(j);
                if xj != 0.0 {
                    let (rows, vals) = self.column(j);
                    for (&r, &a) in rows.iter().zip(vals) {
                        v[r as usize] -= a * xj;
                    }
                }
            }
        }
        self.ftran_into(&mut v);
        self.xb.copy_from_slice(&v[..self.prob.m]);
    }

    fn ftran_into(&self, v: &mut [f64]) {
        self.lu.as_ref().expect("factorized").ftran(v);
        for eta in &self.etas {
            let s = eta.slot as usize;
            let t = v[s] / eta.pivot;
            if t != 0.0 {
                for &(r, w) in &eta.col {
                    v[r as usize] -= w * t;
                }
            }
            v[s] = t;
        }
    }

    fn btran_into(&self, c: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let s = eta.slot as usize;
            let mut acc = c[s];
            for &(r, w) in &eta.col {
                acc -= w * c[r as usize];
            }
            c[s] = acc / eta.pivot;
        }
        self.lu.as_ref().expect("factorized").btran(c);
    }

    fn infeasibility(&self) -> f64 {
        let mut total = 0.0;
        for (slot, &b) in self.basic.iter().enumerate() {
            let x = self.xb[slot];
            let j = b as usize;
            if x < self.lb[j] - FEAS_TOL {
                total += self.lb[j] - x;
            } else if x > self.ub[j] + FEAS_TOL {
                total += x - self.ub[j];
            }
        }
        total
    }

    fn feas_threshold(&self) -> f64 {
        FEAS_TOL * (1.0 + self.prob.m as f64)
    }

    /// One simplex phase over the selected cost regime.
    fn run_phase(&mut self, phase: Phase, iter_limit: u64) -> Result<PhaseEnd> {
        loop {
            if self.iterations >= iter_limit {
                if phase == Phase::Composite {
                    // Budget exhausted: let the caller fall back.
                    return Ok(PhaseEnd::Restarted);
                }
                return Err(CoreError::Solver(format!(
                    "simplex iteration limit {iter_limit} exceeded"
                )));
            }
            if phase == Phase::Composite && self.infeasibility() <= self.feas_threshold() {
                return Ok(PhaseEnd::Optimal);
            }

            // Dual vector for the active cost.
            let mut y = vec![0.0f64; self.prob.m];
            for (slot, &b) in self.basic.iter().enumerate() {
                let j = b as usize;
                y[slot] = match phase {
                    Phase::Composite => {
                        let x = self.xb[slot];
                        if x < self.lb[j] - FEAS_TOL {
                            -1.0
                        } else if x > self.ub[j] + FEAS_TOL {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Phase::Artificial => {
                        if j >= self.prob.n_total {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Phase::Objective => {
                        if j < self.prob.n_total {
                            self.prob.cost[j]
                        } else {
                            0.0
                        }
                    }
                };
            }
            self.btran_into(&mut y);

            // Pricing.
            let mut enter: Option<(usize, f64, i8)> = None;
            for j in 0..self.n_cols {
                if self.state[j] == VarState::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let mut d = match phase {
                    Phase::Composite => 0.0,
                    Phase::Artificial => {
                        if j >= self.prob.n_total {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Phase::Objective => {
                        if j < self.prob.n_total {
                            self.prob.cost[j]
                        } else {
                            0.0
                        }
                    }
                };
                let (rows, vals) = self.column(j);
                for (&r, &a) in rows.iter().zip(vals) {
                    d -= y[r as usize] * a;
                }
                let at_lower = self.state[j] == VarState::AtLower;
                let free = !self.lb[j].is_finite() && !self.ub[j].is_finite();
                let (eligible, dir) = if free {
                    if d < -DUAL_TOL {
                        (true, 1i8)
                    } else if d > DUAL_TOL {
                        (true, -1i8)
                    } else {
                        (false, 0)
                    }
                } else if at_lower {
                    (d < -DUAL_TOL, 1i8)
                } else {
                    (d > DUAL_TOL, -1i8)
                };
                if !eligible {
                    continue;
                }
                if self.bland {
                    enter = Some((j, d.abs(), dir));
                    break;
                }
                match enter {
                    Some((_, best, _)) if best >= d.abs() => {}
                    _ => enter = Some((j, d.abs(), dir)),
                }
            }

            let Some((q, _, dir)) = enter else {
                return Ok(match phase {
                    Phase::Composite | Phase::Artificial => {
                        if self.infeasibility() <= self.feas_threshold() {
                            PhaseEnd::Optimal
                        } else {
                            PhaseEnd::Infeasible
                        }
                    }
                    Phase::Objective => PhaseEnd::Optimal,
                });
            };

            // Direction through the basis.
            let mut alpha = vec![0.0f64; self.prob.m];
            {
                let (rows, vals) = self.column(q);
                for (&r, &a) in rows.iter().zip(vals) {
                    alpha[r as usize] = a;
                }
            }
            self.ftran_into(&mut alpha);

            // Harris two-pass ratio test. The entering variable moves by
            // t*dir >= 0 and basic slot values by -t*dir*alpha. Pass 1 finds
            // the tightest limit with bounds relaxed by the feasibility
            // tolerance; pass 2 picks the largest-pivot blocker whose true
            // limit fits under it and steps to that true limit, so any bound
            // overshoot stays within FEAS_TOL. Under Bland's rule the band
            // collapses to the exact minimum and ties break on the smallest
            // variable id.
            let dirf = dir as f64;
            let own_range = self.ub[q] - self.lb[q];
            let alpha_norm = alpha.iter().fold(0.0f64, |mx, v| mx.max(v.abs()));
            let pivot_floor = if self.bland {
                1e-10
            } else {
                PIVOT_TOL.max(1e-9 * alpha_norm)
            };
            let kink = phase == Phase::Composite;
            let bland = self.bland;
            // (true limit, toleranced limit, state after leaving)
            let limit_of = |slot: usize, a: f64| -> Option<(f64, f64, VarState)> {
                let j = self.basic[slot] as usize;
                let delta = -dirf * a;
                let x = self.xb[slot];
                let below = kink && x < self.lb[j] - FEAS_TOL;
                let above = kink && x > self.ub[j] + FEAS_TOL;
                let (bound, to_state) = if below {
                    if delta > 0.0 {
                        (self.lb[j], VarState::AtLower)
                    } else {
                        return None; // moving further below: no kink
                    }
                } else if above {
                    if delta < 0.0 {
                        (self.ub[j], VarState::AtUpper)
                    } else {
                        return None;
                    }
                } else if delta > 0.0 {
                    if self.ub[j].is_finite() {
                        (self.ub[j], VarState::AtUpper)
                    } else {
                        return None;
                    }
                } else if self.lb[j].is_finite() {
                    (self.lb[j], VarState::AtLower)
                } else {
                    return None;
                };
                let t_true = ((bound - x) / delta).max(0.0);
                let toleranced = if bland { t_true } else { t_true + FEAS_TOL / delta.abs() };
                Some((t_true, toleranced, to_state))
            };

            let mut t_tol = if own_range.is_finite() { own_range } else { f64::INFINITY };
            let mut skipped_small = false;
            for (slot, &a) in alpha.iter().enumerate() {
                if a.abs() <= pivot_floor {
                    if a.abs() > 1e-11 && limit_of(slot, a).is_some() {
                        skipped_small = true;
                    }
                    continue;
                }
                if let Some((_, toleranced, _)) = limit_of(slot, a) {
                    t_tol = t_tol.min(toleranced);
                }
            }
            let mut t_best = f64::INFINITY;
            let mut blocker: Option<(usize, f64, VarState)> = None;
            for (slot, &a) in alpha.iter().enumerate() {
                if a.abs() <= pivot_floor {
                    continue;
                }
                if let Some((t_true, _, to_state)) = limit_of(slot, a) {
                    if t_true <= t_tol {
                        let better = match blocker {
                            None => true,
                            Some((bslot, babs, _)) => {
                                if bland {
                                    self.basic[slot] < self.basic[bslot]
                                } else {
                                    a.abs() > babs
                                }
                            }
                        };
                        if better {
                            blocker = Some((slot, a.abs(), to_state));
                            t_best = t_true;
                        }
                    }
                }
            }
            if own_range.is_finite() && own_range <= t_tol && own_range < t_best {
                blocker = None;
                t_best = own_range;
            }
            if blocker.is_none() && t_best.is_infinite() && !own_range.is_finite() {
                if skipped_small {
                    // The only walls in this direction sat under the pivot
                    // floor: numerically suspicious rather than a proven
                    // ray. Refresh and let the caller retry.
                    self.reset_to_slack_basis()?;
                    return Ok(PhaseEnd::Restarted);
                }
                if std::env::var("MESDOPT_SIMPLEX_DEBUG").is_ok() {
                    let nz = alpha.iter().filter(|v| v.abs() > 1e-14).count();
                    eprintln!(
                        "UNBOUNDED: phase {phase:?} q {q} dir {dir} lb {} ub {} alpha_norm {alpha_norm:.3e} nz {nz} iter {}",
                        self.lb[q], self.ub[q], self.iterations
                    );
                }
                return match phase {
                    Phase::Objective => Ok(PhaseEnd::Unbounded),
                    _ => Err(CoreError::Solver(
                        "unbounded feasibility direction (internal error)".into(),
                    )),
                };
            }
            if blocker.is_none() && t_best.is_infinite() {
                // No blocker but the entering range is finite: bound flip.
                t_best = own_range;
            }

            self.iterations += 1;
            if t_best <= DEGEN_TOL {
                self.degenerate_run += 1;
                if self.degenerate_run >= BLAND_TRIGGER {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = false;
            }

            let step = t_best * dirf;
            match blocker {
                Some((slot, _, to_state)) => {
                    for (s, a) in alpha.iter().enumerate() {
                        if *a != 0.0 {
                            self.xb[s] -= step * a;
                        }
                    }
                    let leaving = self.basic[slot] as usize;
                    let enter_val = self.nonbasic_value(q) + step;
                    self.state[leaving] = to_state;
                    self.state[q] = VarState::Basic;
                    self.basic[slot] = q as u32;
                    self.xb[slot] = enter_val;
                    let unstable = alpha[slot].abs() < 1e-7 * alpha_norm;
                    let col: Vec<(u32, f64)> = alpha
                        .iter()
                        .enumerate()
                        .filter(|&(s, &v)| v != 0.0 && s != slot)
                        .map(|(s, &v)| (s as u32, v))
                        .collect();
                    self.etas.push(Eta { slot: slot as u32, pivot: alpha[slot], col });
                    if (self.etas.len() >= REFACTOR_EVERY || unstable) && !self.refactorize() {
                        self.reset_to_slack_basis()?;
                        return Ok(PhaseEnd::Restarted);
                    }
                }
                None => {
                    for (s, a) in alpha.iter().enumerate() {
                        if *a != 0.0 {
                            self.xb[s] -= step * a;
                        }
                    }
                    self.state[q] = match self.state[q] {
                        VarState::AtLower => VarState::AtUpper,
                        VarState::AtUpper => VarState::AtLower,
                        VarState::Basic => unreachable!(),
                    };
                    self.flips_since_refresh += 1;
                    if self.flips_since_refresh >= 256 {
                        self.recompute_xb();
                        self.flips_since_refresh = 0;
                    }
                }
            }
        }
    }

    /// Installs artificial columns for the classical phase 1: reset to the
    /// slack basis and replace the basic slack of every bound-violating row
    /// by a signed artificial carrying the violation, with the slack parked
    /// at its nearest bound.
    fn install_artificials(&mut self) -> Result<()> {
        self.reset_to_slack_basis()?;
        for i in 0..self.prob.m {
            let slot = i; // slack basis: slot i holds the slack of row i
            let j = self.basic[slot] as usize;
            let x = self.xb[slot];
            let (lo, hi) = (self.lb[j], self.ub[j]);
            let target = if x < lo - FEAS_TOL {
                lo
            } else if x > hi + FEAS_TOL {
                hi
            } else {
                continue;
            };
            let resid = x - target;
            let art = self.prob.n_total + i;
            self.art_vals[i] = if resid >= 0.0 { 1.0 } else { -1.0 };
            self.lb[art] = 0.0;
            self.ub[art] = f64::INFINITY;
            self.state[j] = if target == lo { VarState::AtLower } else { VarState::AtUpper };
            self.state[art] = VarState::Basic;
            self.basic[slot] = art as u32;
            self.xb[slot] = resid.abs();
        }
        if !self.refactorize() {
            return Err(CoreError::Solver("artificial basis singular (internal error)".into()));
        }
        Ok(())
    }

    /// Locks every artificial at zero after a successful phase 1.
    fn retire_artificials(&mut self) {
        for i in 0..self.prob.m {
            let art = self.prob.n_total + i;
            self.lb[art] = 0.0;
            self.ub[art] = 0.0;
        }
    }

    /// Full solve: composite warm phase under a budget, classical
    /// artificial phase 1 as the guaranteed fallback, then phase 2.
    pub fn solve(&mut self, iter_limit: u64) -> Result<SolveEnd> {
        let mut rounds = 0u32;
        loop {
            rounds += 1;
            if rounds > 6 {
                return Err(CoreError::Solver(
                    "repeated basis restarts (numerical breakdown)".into(),
                ));
            }
            // Artificials from an aborted earlier round must not leak into
            // this one with open bounds.
            self.retire_artificials();
            // Feasibility: composite first (cheap from a warm basis), then
            // the artificial fallback.
            let budget = self
                .iterations
                .saturating_add(4 * self.prob.m as u64 + 2000)
                .min(iter_limit);
            let feasible = match self.run_phase(Phase::Composite, budget)? {
                PhaseEnd::Optimal => true,
                PhaseEnd::Unbounded => unreachable!("composite phase is bounded"),
                PhaseEnd::Infeasible | PhaseEnd::Restarted => false,
            };
            if !feasible {
                self.bland = false;
                self.degenerate_run = 0;
                self.install_artificials()?;
                match self.run_phase(Phase::Artificial, iter_limit)? {
                    PhaseEnd::Optimal => {
                        // Feasible iff the artificials vanished.
                        let art_sum: f64 = self
                            .basic
                            .iter()
                            .enumerate()
                            .filter(|&(_, &b)| (b as usize) >= self.prob.n_total)
                            .map(|(slot, _)| self.xb[slot].abs())
                            .sum();
                        if art_sum > self.feas_threshold()
                            || self.infeasibility() > self.feas_threshold()
                        {
                            return Ok(SolveEnd::Infeasible);
                        }
                        self.retire_artificials();
                    }
                    PhaseEnd::Infeasible => return Ok(SolveEnd::Infeasible),
                    PhaseEnd::Unbounded => unreachable!("artificial phase is bounded"),
                    PhaseEnd::Restarted => continue,
                }
            }
            self.bland = false;
            self.degenerate_run = 0;
            match self.run_phase(Phase::Objective, iter_limit)? {
                PhaseEnd::Optimal => {
                    if !self.refactorize() {
                        self.reset_to_slack_basis()?;
                        continue;
                    }
                    if self.infeasibility() > 1e-6 {
                        // Numerical drift: redo feasibility and re-optimize.
                        continue;
                    }
                    return Ok(SolveEnd::Optimal);
                }
                PhaseEnd::Infeasible => return Ok(SolveEnd::Infeasible),
                PhaseEnd::Unbounded => return Ok(SolveEnd::Unbounded),
                PhaseEnd::Restarted => continue,
            }
        }
    }

    /// Dense values of the problem columns (structural + slack).
    pub fn full_values(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.prob.n_total];
        for j in 0..self.prob.n_total {
            if self.state[j] != VarState::Basic {
                x[j] = self.nonbasic_value(j);
            }
        }
        for (slot, &b) in self.basic.iter().enumerate() {
            if (b as usize) < self.prob.n_total {
                x[b as usize] = self.xb[slot];
            }
        }
        x
    }

    /// Snapshot for warm starts. Any artificial still in the basis (only
    /// possible at value ~0) is replaced by its row's slack; a degenerate
    /// duplicate simply makes the next factorization fall back to slacks.
    pub fn basis(&self) -> Basis {
        let mut basic = self.basic.clone();
        let mut state: Vec<VarState> = self.state[..self.prob.n_total].to_vec();
        for b in basic.iter_mut() {
            if *b as usize >= self.prob.n_total {
                let row = self.art_rows[*b as usize - self.prob.n_total];
                let slack = (self.prob.n_struct + row as usize) as u32;
                state[slack as usize] = VarState::Basic;
                *b = slack;
            }
        }
        Basis { basic, state }
    }

    /// Phase-2 reduced costs of all problem columns (for optimality audits).
    pub fn reduced_costs(&self) -> Vec<f64> {
        let mut y = vec![0.0f64; self.prob.m];
        for (slot, &b) in self.basic.iter().enumerate() {
            y[slot] = if (b as usize) < self.prob.n_total {
                self.prob.cost[b as usize]
            } else {
                0.0
            };
        }
        self.btran_into(&mut y);
        (0..self.prob.n_total)
            .map(|j| {
                let (rows, vals) = self.prob.col(j);
                let mut d = self.prob.cost[j];
                for (&r, &a) in rows.iter().zip(vals) {
                    d -= y[r as usize] * a;
                }
                d
            })
            .collect()
    }
}

/// Solves the LP relaxation of a model (integrality dropped, bounds kept).
pub fn solve_lp(model: &MilpModel) -> Result<LpOutcome> {
    let prob = SimplexProblem::from_model(model)?;
    let mut solver = Solver::new(&prob, &prob.lb, &prob.ub, None)?;
    let end = solver.solve(simplex_iter_limit(&prob))?;
    let status = match end {
        SolveEnd::Optimal => LpStatus::Optimal,
        SolveEnd::Infeasible => LpStatus::Infeasible,
        SolveEnd::Unbounded => LpStatus::Unbounded,
    };
    let (values, objective) = match status {
        LpStatus::Optimal => {
            let x = solver.full_values();
            let obj = model.objective_value(&x[..model.n_vars()]);
            (x[..model.n_vars()].to_vec(), obj)
        }
        LpStatus::Unbounded => (Vec::new(), f64::NEG_INFINITY),
        LpStatus::Infeasible => (Vec::new(), f64::INFINITY),
    };
    Ok(LpOutcome { status, values, objective, iterations: solver.iterations })
}

pub(crate) fn simplex_iter_limit(prob: &SimplexProblem) -> u64 {
    (100_000 + 60 * (prob.m + prob.n_total)) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{MilpModel, Relation};

    #[test]
    fn knapsack_relaxation_vertex() {
        // min -5 x1 - 4 x2  s.t. 2 x1 + 3 x2 <= 4, x in [0,1]^2.
        // Optimum at x = (1, 2/3) with objective -5 - 8/3.
        let mut model = MilpModel::new("knapsack_relax");
        let x1 = model.add_var("x1", 0.0, 1.0);
        let x2 = model.add_var("x2", 0.0, 1.0);
        model.set_objective(x1, -5.0);
        model.set_objective(x2, -4.0);
        model.add_row("cap", vec![(x1, 2.0), (x2, 3.0)], Relation::Le, 4.0);
        let out = solve_lp(&model).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.values[0] - 1.0).abs() < 1e-9);
        assert!((out.values[1] - 2.0 / 3.0).abs() < 1e-9);
        assert!((out.objective - (-5.0 - 8.0 / 3.0)).abs() < 1e-9);
    }

    #[test]
    fn empty_objective_feasible_box() {
        let mut model = MilpModel::new("box");
        model.add_var("x", -1.0, 2.0);
        model.add_var("y", 0.0, 5.0);
        let out = solve_lp(&model).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert_eq!(out.objective, 0.0);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut model = MilpModel::new("infeasible");
        let x = model.add_var("x", f64::NEG_INFINITY, f64::INFINITY);
        model.add_row("lo", vec![(x, 1.0)], Relation::Ge, 1.0);
        model.add_row("hi", vec![(x, 1.0)], Relation::Le, 0.0);
        let out = solve_lp(&model).unwrap();
        assert_eq!(out.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_direction_detected() {
        let mut model = MilpModel::new("unbounded");
        let x = model.add_var("x", 0.0, f64::INFINITY);
        model.set_objective(x, -1.0);
        let out = solve_lp(&model).unwrap();
        assert_eq!(out.status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_rows_and_free_vars() {
        // min x + y  s.t. x + y = 3, x - y = 1  ->  x = 2, y = 1.
        let mut model = MilpModel::new("eq");
        let x = model.add_var("x", f64::NEG_INFINITY, f64::INFINITY);
        let y = model.add_var("y", f64::NEG_INFINITY, f64::INFINITY);
        model.set_objective(x, 1.0);
        model.set_objective(y, 1.0);
        model.add_row("sum", vec![(x, 1.0), (y, 1.0)], Relation::Eq, 3.0);
        model.add_row("diff", vec![(x, 1.0), (y, -1.0)], Relation::Eq, 1.0);
        let out = solve_lp(&model).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.values[0] - 2.0).abs() < 1e-9);
        assert!((out.values[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reduced_costs_have_correct_sign_at_optimum() {
        let mut model = MilpModel::new("signs");
        let x1 = model.add_var("x1", 0.0, 10.0);
        let x2 = model.add_var("x2", 0.0, 10.0);
        model.set_objective(x1, 1.0);
        model.set_objective(x2, -2.0);
        model.add_row("r1", vec![(x1, 1.0), (x2, 1.0)], Relation::Le, 6.0);
        let prob = SimplexProblem::from_model(&model).unwrap();
        let mut solver = Solver::new(&prob, &prob.lb, &prob.ub, None).unwrap();
        assert!(matches!(solver.solve(100_000).unwrap(), SolveEnd::Optimal));
        let d = solver.reduced_costs();
        for j in 0..prob.n_total {
            match solver.state[j] {
                VarState::AtLower if prob.lb[j] != prob.ub[j] => {
                    assert!(d[j] >= -1e-7, "lower-bound var {j} has d = {}", d[j])
                }
                VarState::AtUpper if prob.lb[j] != prob.ub[j] => {
                    assert!(d[j] <= 1e-7, "upper-bound var {j} has d = {}", d[j])
                }
                _ => {}
            }
        }
    }

    #[test]
    fn lu_roundtrip_on_random_bases() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _case in 0..200 {
            let m = rng.random_range(3..40);
            let n = rng.random_range(2..30);
            let mut model = MilpModel::new("t");
            for v in 0..n {
                model.add_var(format!("x{v}"), 0.0, 1.0);
            }
            for r in 0..m {
                let mut terms = vec![];
                for v in 0..n {
                    if rng.random_range(0.0..1.0) < 0.3 {
                        terms.push((v, rng.random_range(-4.0..4.0f64)));
                    }
                }
                if terms.is_empty() {
                    terms.push((rng.random_range(0..n), 1.0));
                }
                model.add_row(format!("r{r}"), terms, Relation::Le, rng.random_range(-2.0..2.0));
            }
            let prob = SimplexProblem::from_model(&model).unwrap();
            let art_rows: Vec<u32> = (0..prob.m as u32).collect();
            let art_vals = vec![1.0; prob.m];
            let mut cols: Vec<u32> = (0..prob.n_total as u32).collect();
            for i in (1..cols.len()).rev() {
                let j = rng.random_range(0..=i);
                cols.swap(i, j);
            }
            let basic: Vec<u32> = cols[..prob.m].to_vec();
            let Some(lu) = LuFactors::factorize(&prob, &art_rows, &art_vals, &basic) else {
                continue; // singular draw
            };
            // FTRAN residual: reconstruct B x against the input.
            let mut v: Vec<f64> = (0..prob.m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v0 = v.clone();
            lu.ftran(&mut v);
            let mut recon = vec![0.0; prob.m];
            for (slot, &b) in basic.iter().enumerate() {
                let (rows, vals) = prob.col(b as usize);
                for (&r, &a) in rows.iter().zip(vals) {
                    recon[r as usize] += a * v[slot];
                }
            }
            let err = recon.iter().zip(&v0).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
            assert!(err < 1e-7, "FTRAN residual {err}");
            // BTRAN residual: columns dotted with y match the input.
            let mut c: Vec<f64> = (0..prob.m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c0 = c.clone();
            lu.btran(&mut c);
            for (slot, &b) in basic.iter().enumerate() {
                let (rows, vals) = prob.col(b as usize);
                let dot: f64 = rows.iter().zip(vals).map(|(&r, &a)| a * c[r as usize]).sum();
                assert!((dot - c0[slot]).abs() < 1e-7, "BTRAN residual at slot {slot}");
            }
        }
    }
}
