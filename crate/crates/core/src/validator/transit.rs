//! The journey state machine: the independent semantics that the linear
//! transit rows must reproduce exactly.
//!
//! A unit starts the day parked at a station. At each step it either stays,
//! or departs toward another station `j`, spending exactly `γ_ij^k` steps in
//! transit and reconnecting at step `k + γ_ij^k + 1`; journeys must finish
//! inside the horizon. [`check_transit_feasibility`] replays a flag
//! assignment against this machine; [`enumerate_trajectories`] lists every
//! realizable assignment of a small instance; [`enumerate_row_solutions`]
//! lists every binary assignment satisfying an emitted row set. Equality of
//! the two sets is the core transit-model acceptance criterion.

use std::collections::BTreeSet;

use crate::transit::{LinearRow, PathTable, TransitLayout};

/// One MESD's binary flags over the day, in [`TransitLayout`] pair order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TransitAssignment {
    pub n_i: usize,
    pub n_k: usize,
    /// `m[k * n_i + i]`
    pub m: Vec<bool>,
    /// `e[k * n_pairs + pair]`
    pub e: Vec<bool>,
    /// `y[k]`
    pub y: Vec<bool>,
}

impl TransitAssignment {
    pub fn empty(n_i: usize, n_k: usize) -> Self {
        let pairs = n_i * n_i.saturating_sub(1);
        TransitAssignment {
            n_i,
            n_k,
            m: vec![false; n_i * n_k],
            e: vec![false; pairs * n_k],
            y: vec![false; n_k],
        }
    }

    fn layout(&self) -> TransitLayout {
        TransitLayout::new(self.n_i, self.n_k, 1)
    }

    /// Station index at step `k`, or `None` while in transit.
    pub fn position(&self, k: usize) -> Option<usize> {
        (0..self.n_i).find(|&i| self.m[k * self.n_i + i])
    }

    pub fn set_station(&mut self, k: usize, i: usize) {
        self.m[k * self.n_i + i] = true;
    }

    pub fn set_departure(&mut self, k: usize, i: usize, j: usize) {
        let layout = self.layout();
        let base = self.n_i * self.n_k;
        self.e[layout.e(0, i, j, k) - base] = true;
    }

    pub fn departure(&self, k: usize, i: usize, j: usize) -> bool {
        let layout = self.layout();
        let base = self.n_i * self.n_k;
        self.e[layout.e(0, i, j, k) - base]
    }

    /// Journeys as `(k, from, to)` triples.
    pub fn departures(&self, paths: &PathTable) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for k in 0..self.n_k {
            for i in 0..self.n_i {
                for j in 0..self.n_i {
                    if i != j && self.departure(k, i, j) {
                        out.push((k, i, j));
                    }
                }
            }
        }
        let _ = paths;
        out
    }

    /// Per-step distance implied by the journeys: `d/γ` for every in-transit
    /// step.
    pub fn z_series(&self, paths: &PathTable) -> Vec<f64> {
        let mut z = vec![0.0; self.n_k];
        for (k, i, j) in self.departures(paths) {
            let gamma = paths.gamma(k, i, j) as usize;
            let step_km = paths.dist(k, i, j) / gamma as f64;
            for t in k + 1..=k + gamma {
                if t < self.n_k {
                    z[t] += step_km;
                }
            }
        }
        z
    }

    /// Dense values over the single-unit transit layout (m, e, y, z, count).
    pub fn dense(&self, paths: &PathTable) -> Vec<f64> {
        let layout = self.layout();
        let mut x = vec![0.0; layout.total_vars()];
        for (idx, &b) in self.m.iter().enumerate() {
            x[idx] = b as u8 as f64;
        }
        let e_base = self.n_i * self.n_k;
        for (idx, &b) in self.e.iter().enumerate() {
            x[e_base + idx] = b as u8 as f64;
        }
        for (k, &b) in self.y.iter().enumerate() {
            x[layout.y(0, k)] = b as u8 as f64;
        }
        for (k, &z) in self.z_series(paths).iter().enumerate() {
            x[layout.z(0, k)] = z;
        }
        x[layout.e_count(0)] = self.e.iter().filter(|&&b| b).count() as f64;
        x
    }
}

/// A rejected flag assignment, with the step where the replay failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitViolation {
    pub step: usize,
    pub message: String,
}

impl std::fmt::Display for TransitViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "step {}: {}", self.step, self.message)
    }
}

/// Replays `(m, e)` through the journey state machine.
///
/// Checks that the unit starts parked, every station change is an explicit
/// journey of exactly `γ` in-transit steps landing inside the horizon, no
/// departure flag is raised without its journey, and at most one station is
/// occupied per step.
pub fn check_transit_feasibility(
    assignment: &TransitAssignment,
    paths: &PathTable,
) -> Result<(), TransitViolation> {
    let n_i = assignment.n_i;
    let n_k = assignment.n_k;
    let fail = |step: usize, message: String| Err(TransitViolation { step, message });

    // Single occupancy.
    for k in 0..n_k {
        let occupied = (0..n_i).filter(|&i| assignment.m[k * n_i + i]).count();
        if occupied > 1 {
            return fail(k, format!("connected to {occupied} stations at once"));
        }
    }
    let Some(mut pos) = assignment.position(0) else {
        return fail(0, "unit must start the day parked at a station".to_string());
    };

    let mut expected_e = TransitAssignment::empty(n_i, n_k);
    let mut k = 0;
    while k < n_k - 1 {
        if assignment.position(k) != Some(pos) {
            return fail(k, "internal replay desync".to_string());
        }
        match assignment.position(k + 1) {
            Some(j) if j == pos => {
                k += 1;
            }
            Some(j) => {
                return fail(
                    k + 1,
                    format!("jumped from station {pos} to {j} without a transit period"),
                );
            }
            None => {
                // Departure at k: find the unique target consistent with the
                // observed transit gap.
                let mut t = k + 1;
                while t < n_k && assignment.position(t).is_none() {
                    t += 1;
                }
                if t == n_k {
                    return fail(
                        n_k - 1,
                        "in transit at the end of the horizon (journey never arrives)".to_string(),
                    );
                }
                let j = assignment.position(t).unwrap();
                if j == pos {
                    return fail(t, format!("reconnected to the departure station {j}"));
                }
                let gamma = paths.gamma(k, pos, j) as usize;
                let observed = t - k - 1;
                if observed != gamma {
                    return fail(
                        t,
                        format!(
                            "transit from {pos} to {j} took {observed} steps, expected γ = {gamma}"
                        ),
                    );
                }
                expected_e.set_departure(k, pos, j);
                pos = j;
                k = t;
            }
        }
    }

    // Departure flags must match the replayed journeys exactly.
    for idx in 0..assignment.e.len() {
        if assignment.e[idx] != expected_e.e[idx] {
            let pair_count = n_i * (n_i - 1);
            let k = idx / pair_count;
            return fail(
                k,
                if assignment.e[idx] {
                    "departure flag raised without a matching journey".to_string()
                } else {
                    "journey happened but its departure flag is zero".to_string()
                },
            );
        }
    }

    // Moving flags are determined by presence.
    for k in 0..n_k {
        let parked = assignment.position(k).is_some();
        if assignment.y[k] == parked {
            return fail(k, "moving flag inconsistent with connection flags".to_string());
        }
    }
    Ok(())
}

/// Enumerates every state-machine-feasible assignment of a small instance.
///
/// `max_transits` caps the journey count; `pin_start` fixes the initial
/// station.
pub fn enumerate_trajectories(
    paths: &PathTable,
    max_transits: Option<u32>,
    pin_start: Option<usize>,
) -> Vec<TransitAssignment> {
    let n_i = paths.n_i;
    let n_k = paths.n_k;
    let mut out = Vec::new();
    let starts: Vec<usize> = match pin_start {
        Some(i) => vec![i],
        None => (0..n_i).collect(),
    };
    for start in starts {
        let mut asg = TransitAssignment::empty(n_i, n_k);
        extend(paths, &mut asg, start, 0, 0, max_transits.unwrap_or(u32::MAX), &mut out);
    }
    return out;

    fn extend(
        paths: &PathTable,
        asg: &mut TransitAssignment,
        pos: usize,
        k: usize,
        used: u32,
        cap: u32,
        out: &mut Vec<TransitAssignment>,
    ) {
        asg.set_station(k, pos);
        if k == paths.n_k - 1 {
            let mut done = asg.clone();
            for t in 0..done.n_k {
                done.y[t] = done.position(t).is_none();
            }
            out.push(done);
        } else {
            // Stay.
            extend(paths, asg, pos, k + 1, used, cap, out);
            // Depart.
            if used < cap {
                for j in 0..paths.n_i {
                    if j == pos || !paths.journey_fits(k, pos, j) {
                        continue;
                    }
                    let arrive = k + paths.gamma(k, pos, j) as usize + 1;
                    asg.set_departure(k, pos, j);
                    extend(paths, asg, j, arrive, used + 1, cap, out);
                    let layout = asg.layout();
                    let base = asg.n_i * asg.n_k;
                    asg.e[layout.e(0, pos, j, k) - base] = false;
                }
            }
        }
        asg.m[k * asg.n_i + pos] = false;
    }
}

/// Enumerates every binary `(m, e, y)` assignment that satisfies `rows` (an
/// emitted transit row set for a single unit) with the `fixed_zero`
/// departure variables forced off.
///
/// Candidate generation walks position sequences and is pruned only by
/// facts that are themselves consequences of the rows on binary points, so
/// it never excludes a row-feasible assignment:
///
/// * the moving row at `k = 0` has an empty right side, so `y_0 = 0` and the
///   unit starts parked;
/// * for `j ≠ i` every `γ ≥ 1`, so the step-1 exclusion window forbids
///   station-to-station jumps between consecutive steps;
/// * a transit step needs a covering departure (moving-row equality) parked
///   at its origin (departure upper bounds), so covers start before the
///   transit run and their windows are intervals of length ≤ Γ — transit
///   runs longer than Γ or still open at the horizon are row-infeasible.
///
/// Every surviving candidate is checked against the complete row set, so
/// pruning errors could only hide disagreements, never invent them; the
/// matching oracle-side enumeration guards against hiding.
pub fn enumerate_row_solutions(
    paths: &PathTable,
    rows: &[LinearRow],
    fixed_zero: &[usize],
    max_transits: Option<u32>,
) -> Vec<TransitAssignment> {
    let n_i = paths.n_i;
    let n_k = paths.n_k;
    let gamma_max = paths.gamma_max() as usize;
    let layout = TransitLayout::new(n_i, n_k, 1);
    let fixed: BTreeSet<usize> = fixed_zero.iter().copied().collect();

    const TRANSIT: usize = usize::MAX;
    let mut out = Vec::new();
    let mut seq = vec![0usize; n_k];

    // DFS over position sequences.
    fn walk(
        paths: &PathTable,
        seq: &mut Vec<usize>,
        k: usize,
        gamma_max: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        const TRANSIT: usize = usize::MAX;
        let n_k = paths.n_k;
        let n_i = paths.n_i;
        if k == n_k {
            if seq[n_k - 1] != TRANSIT {
                out.push(seq.clone());
            }
            return;
        }
        'cand: for cand in (0..n_i).chain([TRANSIT]) {
            if k == 0 && cand == TRANSIT {
                continue;
            }
            if cand == TRANSIT {
                // Transit runs longer than Γ are row-infeasible.
                let run = (0..k).rev().take_while(|&t| seq[t] == TRANSIT).count() + 1;
                if run > gamma_max {
                    continue;
                }
            } else {
                // Exclusion windows from every earlier parked step.
                for t in (0..k).rev().take(gamma_max) {
                    let p = seq[t];
                    if p != TRANSIT && p != cand && (k - t) as u32 <= paths.gamma(t, p, cand) {
                        continue 'cand;
                    }
                }
            }
            seq[k] = cand;
            walk(paths, seq, k + 1, gamma_max, out);
        }
    }
    let mut sequences = Vec::new();
    walk(paths, &mut seq, 0, gamma_max.max(1), &mut sequences);

    'seq: for seq in sequences {
        let mut asg = TransitAssignment::empty(n_i, n_k);
        for (k, &p) in seq.iter().enumerate() {
            if p == TRANSIT {
                asg.y[k] = true;
            } else {
                asg.set_station(k, p);
            }
        }
        // Unique journey per transit run: the departure must sit right
        // before the run, its γ must equal the run length, and its target is
        // the station right after the run. Anything else breaks the
        // moving-row equalities.
        let mut k = 0;
        while k < n_k {
            if seq[k] == TRANSIT {
                let start = k;
                while k < n_k && seq[k] == TRANSIT {
                    k += 1;
                }
                let (dep, arr) = (start - 1, k);
                if arr >= n_k {
                    continue 'seq;
                }
                let (i, j) = (seq[dep], seq[arr]);
                let gamma = paths.gamma(dep, i, j) as usize;
                if gamma != arr - start || fixed.contains(&layout.e(0, i, j, dep)) {
                    continue 'seq;
                }
                asg.set_departure(dep, i, j);
            } else {
                k += 1;
            }
        }
        // Full row evaluation over the dense layout vector.
        let dense = asg.dense(paths);
        for idx in &fixed {
            if dense[*idx] != 0.0 {
                continue 'seq;
            }
        }
        if let Some(cap) = max_transits {
            if dense[layout.e_count(0)] > cap as f64 {
                continue 'seq;
            }
        }
        if rows.iter().all(|r| r.satisfied(&dense, 1e-9)) {
            out.push(asg);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Station, StationMap};
    use crate::transit::{
        arrival_coefficients, build_transit_matrix, edge_travel_times, emit_connection_constraints,
        emit_flag_constraints, fastest_paths, FlagEncoding, RoadEdge, RoadNetwork,
    };

    fn simple_paths(n_k: usize) -> PathTable {
        // Three stations in a line; gamma = 1 between neighbors, 2 across.
        let mut edges = Vec::new();
        for (a, b) in [(1u32, 2u32), (2, 3)] {
            edges.push(RoadEdge { a, b, length_km: 10.0, speed_kmh: vec![40.0; n_k] });
            edges.push(RoadEdge { a: b, b: a, length_km: 10.0, speed_kmh: vec![40.0; n_k] });
        }
        let road = RoadNetwork { nodes: vec![1, 2, 3], edges };
        let times = edge_travel_times(&road).unwrap();
        let st = StationMap {
            stations: (1..=3).map(|n| Station { id: n, intersection: n, bus: n }).collect(),
        };
        fastest_paths(&road, &times, &st, n_k, 0.25).unwrap()
    }

    #[test]
    fn stationary_pattern_passes() {
        let paths = simple_paths(5);
        let mut asg = TransitAssignment::empty(3, 5);
        for k in 0..5 {
            asg.set_station(k, 1);
        }
        check_transit_feasibility(&asg, &paths).unwrap();
    }

    #[test]
    fn direct_move_passes_and_early_reconnect_fails() {
        let paths = simple_paths(6);
        let gamma = paths.gamma(1, 0, 1) as usize;
        assert_eq!(gamma, 1);

        let mut ok = TransitAssignment::empty(3, 6);
        ok.set_station(0, 0);
        ok.set_station(1, 0);
        ok.y[2] = true;
        for k in 3..6 {
            ok.set_station(k, 1);
        }
        ok.set_departure(1, 0, 1);
        check_transit_feasibility(&ok, &paths).unwrap();

        // Reconnecting one step too early (no transit gap at all).
        let mut bad = TransitAssignment::empty(3, 6);
        bad.set_station(0, 0);
        bad.set_station(1, 0);
        for k in 2..6 {
            bad.set_station(k, 1);
        }
        bad.set_departure(1, 0, 1);
        let v = check_transit_feasibility(&bad, &paths).unwrap_err();
        assert_eq!(v.step, 2);
    }

    #[test]
    fn spurious_departure_flag_fails() {
        let paths = simple_paths(4);
        let mut asg = TransitAssignment::empty(3, 4);
        for k in 0..4 {
            asg.set_station(k, 0);
        }
        asg.set_departure(1, 0, 1);
        assert!(check_transit_feasibility(&asg, &paths).is_err());
    }

    #[test]
    fn trajectory_enumeration_all_pass_the_checker() {
        let paths = simple_paths(5);
        let all = enumerate_trajectories(&paths, None, None);
        assert!(!all.is_empty());
        for asg in &all {
            check_transit_feasibility(asg, &paths).unwrap();
        }
        // Pinning the start restricts to one third of the trajectories by
        // start station.
        let pinned = enumerate_trajectories(&paths, None, Some(1));
        assert!(pinned.iter().all(|a| a.position(0) == Some(1)));
        // Capping transits to zero leaves exactly the stationary patterns.
        let stationary = enumerate_trajectories(&paths, Some(0), None);
        assert_eq!(stationary.len(), 3);
    }

    #[test]
    fn row_solutions_match_trajectories_both_encodings() {
        let paths = simple_paths(6);
        let f = arrival_coefficients(&paths);
        let tm = build_transit_matrix(&f, &paths);
        let layout = TransitLayout::new(paths.n_i, paths.n_k, 1);

        let oracle: BTreeSet<TransitAssignment> =
            enumerate_trajectories(&paths, None, None).into_iter().collect();

        for encoding in [FlagEncoding::Paper, FlagEncoding::Tight] {
            let mut rows = emit_flag_constraints(&paths, &f, &layout, encoding).rows;
            let fixed = emit_flag_constraints(&paths, &f, &layout, encoding).fixed_zero;
            if encoding == FlagEncoding::Paper {
                rows.extend(emit_connection_constraints(&tm, &layout));
            }
            let got: BTreeSet<TransitAssignment> =
                enumerate_row_solutions(&paths, &rows, &fixed, None).into_iter().collect();
            assert_eq!(got, oracle, "encoding {encoding:?} disagrees with the state machine");
        }
    }
}
