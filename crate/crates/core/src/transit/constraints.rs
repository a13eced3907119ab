//! Linear rows tying connection flags, departures, moving flags and
//! per-step distances together.
//!
//! Two row sets are provided. [`FlagEncoding::Paper`] is the plain
//! formulation: the aggregated exclusion rows of the transit matrix are
//! complemented by per-pair departure/arrival couplings, the moving-flag
//! equalities and the per-step distance definition. [`FlagEncoding::Tight`]
//! admits exactly the same set of binary assignments but replaces the
//! aggregated exclusion rows with their disaggregated pairwise form and the
//! two-sided departure/arrival couplings with dominating single-flag bounds,
//! which gives a much stronger LP relaxation for branch-and-bound. The
//! equivalence of both encodings to the journey state machine is enforced by
//! the oracle tests in `validator`.

use crate::milp::Relation;

use super::matrix::{ArrivalTensor, TransitMatrix};
use super::paths::PathTable;

/// One linear constraint over the transit variable space.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub name: String,
    /// `(variable index, coefficient)` pairs, index-sorted.
    pub terms: Vec<(usize, f64)>,
    pub rel: Relation,
    pub rhs: f64,
}

impl LinearRow {
    fn new(name: String, mut terms: Vec<(usize, f64)>, rel: Relation, rhs: f64) -> Self {
        terms.sort_by_key(|&(idx, _)| idx);
        LinearRow { name, terms, rel, rhs }
    }

    /// Evaluates the row body at a dense assignment.
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(idx, c)| c * x[idx]).sum()
    }

    /// Whether the row holds at a dense assignment, within `tol`.
    pub fn satisfied(&self, x: &[f64], tol: f64) -> bool {
        let a = self.activity(x);
        match self.rel {
            Relation::Le => a <= self.rhs + tol,
            Relation::Ge => a >= self.rhs - tol,
            Relation::Eq => (a - self.rhs).abs() <= tol,
        }
    }
}

/// Kinds of transit variables, in layout order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitVar {
    /// Connection flag `m_is^k` (binary).
    M { s: usize, i: usize, k: usize },
    /// Departure flag `e_ijs^k` (binary), `i ≠ j`.
    E { s: usize, i: usize, j: usize, k: usize },
    /// Moving flag `y_s^k` (binary).
    Y { s: usize, k: usize },
    /// Distance moved during step `k` [km] (continuous, ≥ 0).
    Z { s: usize, k: usize },
    /// Journey count over the day (continuous, ≥ 0).
    ECount { s: usize },
}

/// Index layout of the transit variables for `n_s` MESD units.
///
/// Order: all `m`, then all `e`, `y`, `z`, and the per-unit journey counts.
/// Within `m`, the index is `(s, k, i)`-major so that the `m` block of unit
/// `s` matches the transit-matrix column layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitLayout {
    pub n_i: usize,
    pub n_k: usize,
    pub n_s: usize,
}

impl TransitLayout {
    pub fn new(n_i: usize, n_k: usize, n_s: usize) -> Self {
        TransitLayout { n_i, n_k, n_s }
    }

    /// Ordered station pairs per step: `N_I (N_I − 1)`.
    pub fn n_pairs(&self) -> usize {
        self.n_i * self.n_i.saturating_sub(1)
    }

    fn pair(&self, i: usize, j: usize) -> usize {
        debug_assert!(i != j);
        i * (self.n_i - 1) + if j < i { j } else { j - 1 }
    }

    /// Inverse of [`Self::pair`].
    pub fn pair_stations(&self, pair: usize) -> (usize, usize) {
        let i = pair / (self.n_i - 1);
        let r = pair % (self.n_i - 1);
        let j = if r < i { r } else { r + 1 };
        (i, j)
    }

    pub fn m(&self, s: usize, i: usize, k: usize) -> usize {
        s * self.n_i * self.n_k + k * self.n_i + i
    }

    pub fn e(&self, s: usize, i: usize, j: usize, k: usize) -> usize {
        let base = self.n_s * self.n_i * self.n_k;
        base + (s * self.n_k + k) * self.n_pairs() + self.pair(i, j)
    }

    pub fn y(&self, s: usize, k: usize) -> usize {
        let base = self.n_s * self.n_k * (self.n_i + self.n_pairs());
        base + s * self.n_k + k
    }

    pub fn z(&self, s: usize, k: usize) -> usize {
        let base = self.n_s * self.n_k * (self.n_i + self.n_pairs() + 1);
        base + s * self.n_k + k
    }

    pub fn e_count(&self, s: usize) -> usize {
        let base = self.n_s * self.n_k * (self.n_i + self.n_pairs() + 2);
        base + s
    }

    pub fn total_vars(&self) -> usize {
        self.n_s * (self.n_k * (self.n_i + self.n_pairs() + 2) + 1)
    }

    /// The variable at a layout index.
    pub fn var(&self, idx: usize) -> TransitVar {
        let m_block = self.n_s * self.n_i * self.n_k;
        let e_block = self.n_s * self.n_k * self.n_pairs();
        let yk_block = self.n_s * self.n_k;
        if idx < m_block {
            let s = idx / (self.n_i * self.n_k);
            let r = idx % (self.n_i * self.n_k);
            TransitVar::M { s, i: r % self.n_i, k: r / self.n_i }
        } else if idx < m_block + e_block {
            let r = idx - m_block;
            let sk = r / self.n_pairs();
            let (i, j) = self.pair_stations(r % self.n_pairs());
            TransitVar::E { s: sk / self.n_k, i, j, k: sk % self.n_k }
        } else if idx < m_block + e_block + yk_block {
            let r = idx - m_block - e_block;
            TransitVar::Y { s: r / self.n_k, k: r % self.n_k }
        } else if idx < m_block + e_block + 2 * yk_block {
            let r = idx - m_block - e_block - yk_block;
            TransitVar::Z { s: r / self.n_k, k: r % self.n_k }
        } else {
            TransitVar::ECount { s: idx - m_block - e_block - 2 * yk_block }
        }
    }

    /// Human-readable variable name, stable across runs.
    pub fn var_name(&self, idx: usize) -> String {
        match self.var(idx) {
            TransitVar::M { s, i, k } => format!("m_s{s}_i{i}_k{k}"),
            TransitVar::E { s, i, j, k } => format!("e_s{s}_i{i}_j{j}_k{k}"),
            TransitVar::Y { s, k } => format!("y_s{s}_k{k}"),
            TransitVar::Z { s, k } => format!("z_s{s}_k{k}"),
            TransitVar::ECount { s } => format!("etot_s{s}"),
        }
    }
}

/// Flag-constraint encoding choice (see module docs).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlagEncoding {
    /// Plain per-pair couplings; pairs with the aggregated transit-matrix
    /// rows from [`emit_connection_constraints`].
    Paper,
    /// Binary-equivalent strengthened rows, exclusions included; does not
    /// need the aggregated rows.
    Tight,
}

/// Emitted flag constraints plus the departure variables that are fixed to
/// zero because their journey cannot finish inside the horizon.
#[derive(Debug, Clone)]
pub struct FlagConstraints {
    pub rows: Vec<LinearRow>,
    /// Layout indices of `e` variables forced to zero.
    pub fixed_zero: Vec<usize>,
}

/// Emits the aggregated exclusion rows `T · M_s ≤ 1` for every MESD.
///
/// The same matrix applies to every unit: transits are independent, so one
/// block per unit suffices.
pub fn emit_connection_constraints(tm: &TransitMatrix, layout: &TransitLayout) -> Vec<LinearRow> {
    let mut rows = Vec::with_capacity(layout.n_s * tm.n_rows());
    for s in 0..layout.n_s {
        let m_base = layout.m(s, 0, 0);
        for (r, t_row) in tm.rows.iter().enumerate() {
            let k = r / tm.n_i;
            let i = r % tm.n_i;
            let terms = t_row.iter().map(|&(col, v)| (m_base + col, v)).collect();
            rows.push(LinearRow::new(
                format!("connect_s{s}_k{k}_i{i}"),
                terms,
                Relation::Le,
                1.0,
            ));
        }
    }
    rows
}

/// Emits the departure/moving-flag/distance rows for every MESD.
pub fn emit_flag_constraints(
    paths: &PathTable,
    f: &ArrivalTensor,
    layout: &TransitLayout,
    encoding: FlagEncoding,
) -> FlagConstraints {
    let n_i = layout.n_i;
    let n_k = layout.n_k;
    let gamma_max = paths.gamma_max() as usize;
    let mut rows = Vec::new();
    let mut fixed_zero = Vec::new();

    for s in 0..layout.n_s {
        // Journeys that cannot complete inside the horizon are disallowed.
        for k in 0..n_k {
            for i in 0..n_i {
                for j in 0..n_i {
                    if i != j && !paths.journey_fits(k, i, j) {
                        fixed_zero.push(layout.e(s, i, j, k));
                    }
                }
            }
        }

        // At most one departure per step.
        for k in 0..n_k {
            let terms: Vec<_> = pairs(n_i).map(|(i, j)| (layout.e(s, i, j, k), 1.0)).collect();
            if !terms.is_empty() {
                rows.push(LinearRow::new(
                    format!("one_departure_s{s}_k{k}"),
                    terms,
                    Relation::Le,
                    1.0,
                ));
            }
        }

        // Journey count over the day.
        let mut count_terms = vec![(layout.e_count(s), 1.0)];
        for k in 0..n_k {
            for (i, j) in pairs(n_i) {
                count_terms.push((layout.e(s, i, j, k), -1.0));
            }
        }
        rows.push(LinearRow::new(
            format!("transit_count_s{s}"),
            count_terms,
            Relation::Eq,
            0.0,
        ));

        match encoding {
            FlagEncoding::Paper => {
                // Departure lower bound per target pair. Arrival terms whose
                // step falls outside the horizon contribute zero.
                for k in 0..n_k.saturating_sub(1) {
                    for (i, j) in pairs(n_i) {
                        let gamma = paths.gamma(k, i, j) as usize;
                        let mut terms: Vec<(usize, f64)> = (0..n_i)
                            .filter(|&t| t != i)
                            .map(|t| (layout.e(s, i, t, k), 1.0))
                            .collect();
                        terms.push((layout.m(s, i, k), -1.0));
                        terms.push((layout.m(s, i, k + 1), 1.0));
                        if k + gamma <= n_k - 1 {
                            terms.push((layout.m(s, j, k + gamma), 1.0));
                        }
                        if k + gamma + 1 <= n_k - 1 {
                            terms.push((layout.m(s, j, k + gamma + 1), -1.0));
                        }
                        rows.push(LinearRow::new(
                            format!("depart_lower_s{s}_i{i}_j{j}_k{k}"),
                            terms,
                            Relation::Ge,
                            -1.0,
                        ));
                    }
                }
                // Departure upper bound: a departure needs the unit parked
                // at the origin now and at the destination on arrival.
                for k in 0..n_k {
                    for (i, j) in pairs(n_i) {
                        let gamma = paths.gamma(k, i, j) as usize;
                        let mut terms = vec![(layout.e(s, i, j, k), 2.0), (layout.m(s, i, k), -1.0)];
                        if k + gamma + 1 <= n_k - 1 {
                            terms.push((layout.m(s, j, k + gamma + 1), -1.0));
                        }
                        rows.push(LinearRow::new(
                            format!("depart_upper_s{s}_i{i}_j{j}_k{k}"),
                            terms,
                            Relation::Le,
                            0.0,
                        ));
                    }
                }
            }
            FlagEncoding::Tight => {
                // Disaggregated exclusion windows (binary-equivalent to the
                // aggregated transit-matrix rows).
                for k in 0..n_k.saturating_sub(1) {
                    for (i, j) in pairs(n_i) {
                        let gamma = paths.gamma(k, i, j) as usize;
                        for tau in 1..=gamma.min(n_k - 1 - k) {
                            rows.push(LinearRow::new(
                                format!("exclude_s{s}_i{i}_j{j}_k{k}_t{tau}"),
                                vec![(layout.m(s, i, k), 1.0), (layout.m(s, j, k + tau), 1.0)],
                                Relation::Le,
                                1.0,
                            ));
                        }
                    }
                }
                // e up-links: departure parked at origin, arrival parked at
                // destination.
                for k in 0..n_k {
                    for (i, j) in pairs(n_i) {
                        if !paths.journey_fits(k, i, j) {
                            continue;
                        }
                        let arr = k + paths.gamma(k, i, j) as usize + 1;
                        rows.push(LinearRow::new(
                            format!("dep_site_s{s}_i{i}_j{j}_k{k}"),
                            vec![(layout.e(s, i, j, k), 1.0), (layout.m(s, i, k), -1.0)],
                            Relation::Le,
                            0.0,
                        ));
                        rows.push(LinearRow::new(
                            format!("arr_site_s{s}_i{i}_j{j}_k{k}"),
                            vec![(layout.e(s, i, j, k), 1.0), (layout.m(s, j, arr), -1.0)],
                            Relation::Le,
                            0.0,
                        ));
                    }
                }
                // Leaving a station forces a departure flag.
                for k in 0..n_k.saturating_sub(1) {
                    for i in 0..n_i {
                        let mut terms: Vec<(usize, f64)> = (0..n_i)
                            .filter(|&j| j != i)
                            .map(|j| (layout.e(s, i, j, k), 1.0))
                            .collect();
                        terms.push((layout.m(s, i, k), -1.0));
                        terms.push((layout.m(s, i, k + 1), 1.0));
                        rows.push(LinearRow::new(
                            format!("depart_link_s{s}_i{i}_k{k}"),
                            terms,
                            Relation::Ge,
                            0.0,
                        ));
                    }
                }
            }
        }

        // Moving flag: parked at exactly one station or in transit.
        for k in 0..n_k {
            let mut terms: Vec<(usize, f64)> = (0..n_i).map(|i| (layout.m(s, i, k), 1.0)).collect();
            terms.push((layout.y(s, k), 1.0));
            rows.push(LinearRow::new(format!("presence_s{s}_k{k}"), terms, Relation::Eq, 1.0));
        }

        // Moving flag matches the transit windows of past departures. At
        // k = 0 the sum is empty: units start the day parked.
        for k in 0..n_k {
            let mut terms = vec![(layout.y(s, k), 1.0)];
            for tau in k.saturating_sub(gamma_max)..k {
                let lag = (k - tau) as u32;
                for (i, j) in pairs(n_i) {
                    if f.get(tau, lag, i, j) {
                        terms.push((layout.e(s, i, j, tau), -1.0));
                    }
                }
            }
            rows.push(LinearRow::new(format!("moving_s{s}_k{k}"), terms, Relation::Eq, 0.0));
        }

        // Per-step distance: d/γ for every in-transit step of a journey.
        for k in 0..n_k {
            let mut terms = vec![(layout.z(s, k), 1.0)];
            for tau in k.saturating_sub(gamma_max)..k {
                let lag = (k - tau) as u32;
                for (i, j) in pairs(n_i) {
                    if f.get(tau, lag, i, j) {
                        let step_km = paths.dist(tau, i, j) / paths.gamma(tau, i, j) as f64;
                        terms.push((layout.e(s, i, j, tau), -step_km));
                    }
                }
            }
            rows.push(LinearRow::new(format!("distance_s{s}_k{k}"), terms, Relation::Eq, 0.0));
        }
    }

    FlagConstraints { rows, fixed_zero }
}

fn pairs(n_i: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n_i).flat_map(move |i| (0..n_i).filter(move |&j| j != i).map(move |j| (i, j)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_indices_are_a_bijection() {
        let layout = TransitLayout::new(3, 5, 2);
        let mut seen = vec![false; layout.total_vars()];
        for s in 0..2 {
            for k in 0..5 {
                for i in 0..3 {
                    seen[layout.m(s, i, k)] = true;
                    for j in 0..3 {
                        if i != j {
                            seen[layout.e(s, i, j, k)] = true;
                        }
                    }
                }
                seen[layout.y(s, k)] = true;
                seen[layout.z(s, k)] = true;
            }
            seen[layout.e_count(s)] = true;
        }
        assert!(seen.iter().all(|&b| b), "layout must cover every index exactly once");
        for idx in 0..layout.total_vars() {
            let v = layout.var(idx);
            let back = match v {
                TransitVar::M { s, i, k } => layout.m(s, i, k),
                TransitVar::E { s, i, j, k } => layout.e(s, i, j, k),
                TransitVar::Y { s, k } => layout.y(s, k),
                TransitVar::Z { s, k } => layout.z(s, k),
                TransitVar::ECount { s } => layout.e_count(s),
            };
            assert_eq!(back, idx);
        }
    }

    #[test]
    fn variable_counts_match_formulas() {
        // N_I = 5, N_K = 96, N_S = 2: m = 960, e = 3840, w/y = 192 each.
        let layout = TransitLayout::new(5, 96, 2);
        assert_eq!(layout.n_s * layout.n_i * layout.n_k, 960);
        assert_eq!(layout.n_s * layout.n_k * layout.n_pairs(), 3840);
        assert_eq!(layout.n_s * layout.n_k, 192);
    }
}
