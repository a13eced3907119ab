//! MILP assembly from the precomputed transit and grid artifacts.

use crate::grid::SensitivityBundle;
use crate::milp::{MilpModel, Relation, VarId};
use crate::scenario::Scenario;
use crate::transit::{
    emit_connection_constraints, emit_flag_constraints, FlagEncoding, PathTable, TransitLayout,
    TransitMatrix, TransitVar,
};
use crate::validator::TransitAssignment;
use crate::{CoreError, Result};

/// Index map of the dispatch variables appended after the transit block.
#[derive(Debug, Clone, Copy)]
pub struct DispatchVars {
    pub layout: TransitLayout,
    w0: usize,
    p0: usize,
    q0: usize,
    pc0: usize,
    pd0: usize,
    soc0: usize,
    dploss0: usize,
}

impl DispatchVars {
    pub fn w(&self, s: usize, k: usize) -> VarId {
        self.w0 + s * self.layout.n_k + k
    }
    pub fn p(&self, s: usize, i: usize, k: usize) -> VarId {
        self.p0 + (s * self.layout.n_k + k) * self.layout.n_i + i
    }
    pub fn q(&self, s: usize, i: usize, k: usize) -> VarId {
        self.q0 + (s * self.layout.n_k + k) * self.layout.n_i + i
    }
    pub fn pc(&self, s: usize, i: usize, k: usize) -> VarId {
        self.pc0 + (s * self.layout.n_k + k) * self.layout.n_i + i
    }
    pub fn pd(&self, s: usize, i: usize, k: usize) -> VarId {
        self.pd0 + (s * self.layout.n_k + k) * self.layout.n_i + i
    }
    pub fn soc(&self, s: usize, k: usize) -> VarId {
        self.soc0 + s * self.layout.n_k + k
    }
    pub fn dploss(&self, k: usize) -> VarId {
        self.dploss0 + k
    }
}

/// Which strategy the model encodes.
#[derive(Debug, Clone)]
pub enum AssembleMode {
    /// Free routing and dispatch (the co-optimized strategy).
    Case1,
    /// Stationary placement: connection flags constant over the day, no
    /// journeys, loss term only.
    Case2Placement,
    /// Dispatch-only with every unit's trajectory fixed.
    FixedTransit(Vec<TransitAssignment>),
}

/// The assembled model plus its variable map.
#[derive(Debug, Clone)]
pub struct AssembledModel {
    pub model: MilpModel,
    pub vars: DispatchVars,
}

/// Builds the MILP for a scenario.
///
/// Emits the tightened (binary-equivalent) transit encoding plus the
/// dispatch rows; sensitivity rows that provably can never bind are dropped
/// when `options.prune_redundant` is set.
pub fn assemble(
    scenario: &Scenario,
    bundle: &SensitivityBundle,
    paths: &PathTable,
    tm: &TransitMatrix,
    mode: &AssembleMode,
) -> Result<AssembledModel> {
    let n_i = scenario.n_i();
    let n_k = scenario.n_k;
    let n_s = scenario.n_s();
    if bundle.steps.len() != n_k {
        return Err(CoreError::Assembly(format!(
            "sensitivity bundle has {} steps, scenario has {n_k}",
            bundle.steps.len()
        )));
    }
    for st in &scenario.stations.stations {
        if scenario.grid.bus_index(st.bus).is_none() {
            return Err(CoreError::Assembly(format!("station {} maps to unknown bus", st.id)));
        }
    }

    let layout = TransitLayout::new(n_i, n_k, n_s);
    let mut model = MilpModel::new(format!("mesdopt_{}", scenario.name));

    // Transit block: declare variables in layout order.
    for idx in 0..layout.total_vars() {
        let name = layout.var_name(idx);
        match layout.var(idx) {
            TransitVar::M { .. } | TransitVar::E { .. } | TransitVar::Y { .. } => {
                model.add_binary(name);
            }
            TransitVar::Z { .. } => {
                model.add_var(name, 0.0, f64::INFINITY);
            }
            TransitVar::ECount { s } => {
                let cap = scenario
                    .options
                    .max_transits
                    .map(|c| c as f64)
                    .unwrap_or(f64::INFINITY);
                model.add_var(name, 0.0, cap);
                let _ = s;
            }
        }
    }

    // Transit rows.
    let flags = emit_flag_constraints(paths, &tm.arrival, &layout, FlagEncoding::Tight);
    for row in flags.rows {
        model.add_row(row.name, row.terms, row.rel, row.rhs);
    }
    for idx in flags.fixed_zero {
        model.fix_var(idx, 0.0);
    }
    // The aggregated rows are implied by the disaggregated ones; keep them
    // out of the model. (They remain available via
    // `emit_connection_constraints` for audits.)
    let _ = emit_connection_constraints;

    // Pinned start stations.
    for (&s, &station_id) in &scenario.options.pin_start {
        let i = scenario
            .station_index(station_id)
            .ok_or_else(|| CoreError::Assembly(format!("pin_start station {station_id} unknown")))?;
        model.fix_var(layout.m(s, i, 0), 1.0);
    }

    // Dispatch variables.
    let w0 = model.n_vars();
    for s in 0..n_s {
        for k in 0..n_k {
            model.add_binary(format!("w_s{s}_k{k}"));
        }
    }
    let add_block = |model: &mut MilpModel, prefix: &str, lb: fn(&Scenario, usize) -> f64, ub: fn(&Scenario, usize) -> f64| -> usize {
        let base = model.n_vars();
        for s in 0..n_s {
            for k in 0..n_k {
                for i in 0..n_i {
                    model.add_var(format!("{prefix}_s{s}_i{i}_k{k}"), lb(scenario, s), ub(scenario, s));
                }
            }
        }
        base
    };
    let p0 = add_block(&mut model, "p", |sc, s| sc.fleet[s].p_min_kw, |sc, s| sc.fleet[s].p_max_kw);
    let q0 = add_block(
        &mut model,
        "q",
        |sc, s| {
            let spec = &sc.fleet[s];
            -spec.q_ratio() * spec.p_max_kw.max(-spec.p_min_kw)
        },
        |sc, s| {
            let spec = &sc.fleet[s];
            spec.q_ratio() * spec.p_max_kw.max(-spec.p_min_kw)
        },
    );
    let pc0 = add_block(&mut model, "pc", |sc, s| sc.fleet[s].p_min_kw, |_, _| 0.0);
    let pd0 = add_block(&mut model, "pd", |_, _| 0.0, |sc, s| sc.fleet[s].p_max_kw);
    let soc0 = model.n_vars();
    for s in 0..n_s {
        let spec = &scenario.fleet[s];
        for k in 0..n_k {
            let (mut lo, mut hi) = (spec.e_min, spec.e_max);
            if k == n_k - 1 {
                lo = lo.max(spec.e_0 - spec.de_max);
                hi = hi.min(spec.e_0 + spec.de_max);
            }
            model.add_var(format!("soc_s{s}_k{k}"), lo, hi);
        }
    }
    let dploss0 = model.n_vars();
    for k in 0..n_k {
        model.add_var(format!("dploss_k{k}"), f64::NEG_INFINITY, f64::INFINITY);
    }
    let vars = DispatchVars { layout, w0, p0, q0, pc0, pd0, soc0, dploss0 };

    // Per-unit dispatch rows.
    for s in 0..n_s {
        let spec = &scenario.fleet[s];
        let ratio = (1.0 - spec.pf_min * spec.pf_min).sqrt();
        for k in 0..n_k {
            for i in 0..n_i {
                let (m, p, q) = (layout.m(s, i, k), vars.p(s, i, k), vars.q(s, i, k));
                let (pc, pd, w) = (vars.pc(s, i, k), vars.pd(s, i, k), vars.w(s, k));
                // Power gated by connection.
                model.add_row(
                    format!("p_ub_s{s}_i{i}_k{k}"),
                    vec![(p, 1.0), (m, -spec.p_max_kw)],
                    Relation::Le,
                    0.0,
                );
                model.add_row(
                    format!("p_lb_s{s}_i{i}_k{k}"),
                    vec![(p, 1.0), (m, -spec.p_min_kw)],
                    Relation::Ge,
                    0.0,
                );
                // Split into charge and discharge parts.
                model.add_row(
                    format!("p_split_s{s}_i{i}_k{k}"),
                    vec![(p, 1.0), (pc, -1.0), (pd, -1.0)],
                    Relation::Eq,
                    0.0,
                );
                // Mode gating and connection gating of each part.
                model.add_row(
                    format!("pc_w_s{s}_i{i}_k{k}"),
                    vec![(pc, 1.0), (w, spec.p_min_kw)],
                    Relation::Ge,
                    spec.p_min_kw,
                );
                model.add_row(
                    format!("pc_m_s{s}_i{i}_k{k}"),
                    vec![(pc, 1.0), (m, -spec.p_min_kw)],
                    Relation::Ge,
                    0.0,
                );
                model.add_row(
                    format!("pd_w_s{s}_i{i}_k{k}"),
                    vec![(pd, 1.0), (w, -spec.p_max_kw)],
                    Relation::Le,
                    0.0,
                );
                model.add_row(
                    format!("pd_m_s{s}_i{i}_k{k}"),
                    vec![(pd, 1.0), (m, -spec.p_max_kw)],
                    Relation::Le,
                    0.0,
                );
                // Power-factor band on Q.
                model.add_row(
                    format!("q_ub_s{s}_i{i}_k{k}"),
                    vec![(q, spec.pf_min), (pd, -ratio), (pc, ratio)],
                    Relation::Le,
                    0.0,
                );
                model.add_row(
                    format!("q_lb_s{s}_i{i}_k{k}"),
                    vec![(q, spec.pf_min), (pd, ratio), (pc, -ratio)],
                    Relation::Ge,
                    0.0,
                );
            }
            // SOC recursion.
            let scale = scenario.t_unit_h / spec.e_cap_kwh;
            let mut terms = vec![(vars.soc(s, k), 1.0)];
            if k > 0 {
                terms.push((vars.soc(s, k - 1), -1.0));
            }
            for i in 0..n_i {
                terms.push((vars.pc(s, i, k), spec.eta_c * scale));
                terms.push((vars.pd(s, i, k), spec.eta_d * scale));
            }
            terms.push((layout.z(s, k), spec.eta_transit_kwh_per_km / spec.e_cap_kwh));
            let rhs = if k == 0 { spec.e_0 } else { 0.0 };
            model.add_row(format!("soc_s{s}_k{k}"), terms, Relation::Eq, rhs);
        }
    }

    // Grid sensitivity rows.
    let station_bus: Vec<usize> = scenario
        .stations
        .stations
        .iter()
        .map(|st| scenario.grid.bus_index(st.bus).unwrap())
        .collect();
    // Conservative worst-case injection magnitudes for row pruning.
    let p_cap_total: f64 = scenario.fleet.iter().map(|f| f.p_max_kw.max(-f.p_min_kw)).sum();
    let q_cap_total: f64 = scenario
        .fleet
        .iter()
        .map(|f| f.q_ratio() * f.p_max_kw.max(-f.p_min_kw))
        .sum();

    for k in 0..n_k {
        let step = &bundle.steps[k];
        // Loss-increment definition.
        let mut terms = vec![(vars.dploss(k), 1.0)];
        for (i, &b) in station_bus.iter().enumerate() {
            let (cp, cq) = (step.s_ploss[2 * b], step.s_ploss[2 * b + 1]);
            for s in 0..n_s {
                if cp != 0.0 {
                    terms.push((vars.p(s, i, k), -cp));
                }
                if cq != 0.0 {
                    terms.push((vars.q(s, i, k), -cq));
                }
            }
        }
        model.add_row(format!("dploss_def_k{k}"), terms, Relation::Eq, 0.0);

        // Voltage increment limits.
        for (v, row) in step.s_v.iter().enumerate() {
            let mut terms = Vec::new();
            let mut reach = 0.0;
            for (i, &b) in station_bus.iter().enumerate() {
                let (cp, cq) = (row[2 * b], row[2 * b + 1]);
                reach += cp.abs() * p_cap_total + cq.abs() * q_cap_total;
                for s in 0..n_s {
                    if cp != 0.0 {
                        terms.push((vars.p(s, i, k), cp));
                    }
                    if cq != 0.0 {
                        terms.push((vars.q(s, i, k), cq));
                    }
                }
            }
            if terms.is_empty() {
                continue;
            }
            let prune = scenario.options.prune_redundant;
            if !prune || reach > bundle.dv_max_pu {
                model.add_row(format!("dv_ub_b{v}_k{k}"), terms.clone(), Relation::Le, bundle.dv_max_pu);
            }
            if !prune || -reach < bundle.dv_min_pu {
                model.add_row(format!("dv_lb_b{v}_k{k}"), terms, Relation::Ge, bundle.dv_min_pu);
            }
        }

        // Flow increment limits.
        for (l, row) in step.s_l.iter().enumerate() {
            let mut terms = Vec::new();
            let mut reach = 0.0;
            for (i, &b) in station_bus.iter().enumerate() {
                let (cp, cq) = (row[2 * b], row[2 * b + 1]);
                reach += cp.abs() * p_cap_total + cq.abs() * q_cap_total;
                for s in 0..n_s {
                    if cp != 0.0 {
                        terms.push((vars.p(s, i, k), cp));
                    }
                    if cq != 0.0 {
                        terms.push((vars.q(s, i, k), cq));
                    }
                }
            }
            if terms.is_empty() {
                continue;
            }
            let limit = bundle.dl_max_kva[l];
            if !scenario.options.prune_redundant || reach > limit {
                model.add_row(format!("dl_ub_l{l}_k{k}"), terms.clone(), Relation::Le, limit);
                model.add_row(format!("dl_lb_l{l}_k{k}"), terms, Relation::Ge, -limit);
            }
        }
    }

    // Objective: loss cost plus transit energy cost.
    let t = scenario.t_unit_h;
    for k in 0..n_k {
        model.set_objective(vars.dploss(k), scenario.price_per_kwh[k] * t);
    }
    for s in 0..n_s {
        let eta = scenario.fleet[s].eta_transit_kwh_per_km;
        for k in 0..n_k {
            for i in 0..n_i {
                for j in 0..n_i {
                    if i != j {
                        let cost = eta * scenario.price_per_kwh[k] * paths.dist(k, i, j);
                        model.set_objective(layout.e(s, i, j, k), cost);
                    }
                }
            }
        }
    }

    // Mode-specific restrictions.
    match mode {
        AssembleMode::Case1 => {}
        AssembleMode::Case2Placement => {
            for s in 0..n_s {
                for k in 0..n_k {
                    for i in 0..n_i {
                        if k > 0 {
                            model.add_row(
                                format!("stationary_s{s}_i{i}_k{k}"),
                                vec![(layout.m(s, i, k), 1.0), (layout.m(s, i, 0), -1.0)],
                                Relation::Eq,
                                0.0,
                            );
                        }
                        for j in 0..n_i {
                            if i != j {
                                model.fix_var(layout.e(s, i, j, k), 0.0);
                            }
                        }
                    }
                    model.fix_var(layout.y(s, k), 0.0);
                    model.fix_var(layout.z(s, k), 0.0);
                }
            }
        }
        AssembleMode::FixedTransit(fixed) => {
            if fixed.len() != n_s {
                return Err(CoreError::Assembly(format!(
                    "fixed transit plan covers {} units, fleet has {n_s}",
                    fixed.len()
                )));
            }
            for (s, asg) in fixed.iter().enumerate() {
                if asg.n_i != n_i || asg.n_k != n_k {
                    return Err(CoreError::Assembly(format!(
                        "fixed transit plan for unit {s} has wrong dimensions"
                    )));
                }
                for k in 0..n_k {
                    for i in 0..n_i {
                        model.fix_var(layout.m(s, i, k), asg.m[k * n_i + i] as u8 as f64);
                        for j in 0..n_i {
                            if i != j {
                                model.fix_var(
                                    layout.e(s, i, j, k),
                                    asg.departure(k, i, j) as u8 as f64,
                                );
                            }
                        }
                    }
                    model.fix_var(layout.y(s, k), asg.y[k] as u8 as f64);
                }
            }
        }
    }

    model.validate()?;
    Ok(AssembledModel { model, vars })
}
