//! Arrival coefficients and the transit matrix.
//!
//! The transit matrix `T` turns the per-departure exclusion rule — a unit
//! parked at station `i` at step `k` cannot be connected to any other
//! station `j` before the minimum travel time `γ_ij^k` has elapsed — into
//! one linear row per (step, station). Row `(k, i)` carries a unit
//! coefficient on `m_i^k` and `1/(N_I·Γ)` on every excluded `m_j^{k+τ}`, so
//! the row sum can only exceed 1 when the exclusion is violated.
//!
//! The arrival-coefficient tensor `f` marks, for each departure `(i, j, k)`,
//! the `τ = 1..γ_ij^k` steps a unit spends in transit. Departures whose
//! arrival step `k + γ + 1` falls outside the horizon have `f = 0`
//! everywhere: such journeys cannot complete and are excluded from the
//! moving-flag and distance couplings, which (together with the departure
//! rows) makes them infeasible. The exclusion windows inside `T` itself are
//! *not* zeroed for late departures — the "no early reconnection" rule binds
//! up to the end of the horizon regardless of whether the journey could
//! finish.

use super::paths::PathTable;

/// Binary tensor `f_{τ ij}^k` for `1 ≤ τ ≤ Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalTensor {
    pub n_i: usize,
    pub n_k: usize,
    pub gamma_max: u32,
    bits: Vec<bool>,
}

impl ArrivalTensor {
    /// `f_{τ ij}^k` with `τ` 1-based and `k`, `i`, `j` 0-based.
    pub fn get(&self, k: usize, tau: u32, i: usize, j: usize) -> bool {
        if tau == 0 || tau > self.gamma_max {
            return false;
        }
        let g = self.gamma_max as usize;
        self.bits[((k * g + (tau as usize - 1)) * self.n_i + i) * self.n_i + j]
    }
}

/// Builds the arrival-coefficient tensor from the path table.
///
/// `f_{τ ij}^k = 1` iff `i ≠ j`, `1 ≤ τ ≤ γ_ij^k` and the journey's arrival
/// step lies inside the horizon.
pub fn arrival_coefficients(paths: &PathTable) -> ArrivalTensor {
    let n_i = paths.n_i;
    let n_k = paths.n_k;
    let g = paths.gamma_max() as usize;
    let mut bits = vec![false; n_k * g * n_i * n_i];
    for k in 0..n_k {
        for i in 0..n_i {
            for j in 0..n_i {
                if i == j || !paths.journey_fits(k, i, j) {
                    continue;
                }
                let gamma = paths.gamma(k, i, j) as usize;
                for tau in 1..=gamma {
                    bits[((k * g + (tau - 1)) * n_i + i) * n_i + j] = true;
                }
            }
        }
    }
    ArrivalTensor { n_i, n_k, gamma_max: paths.gamma_max(), bits }
}

/// The block matrix `T` in sparse row form plus the arrival tensor.
///
/// `T` has `N_I·(N_K−1)` rows and `N_I·N_K` columns; column `k·N_I + j`
/// corresponds to the connection flag `m_j^k`. Every off-identity nonzero
/// equals `1/(N_I·Γ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitMatrix {
    pub n_i: usize,
    pub n_k: usize,
    pub gamma_max: u32,
    /// `1/(N_I·Γ)`, or 0 when Γ = 0 (single-station networks).
    pub scale: f64,
    /// Sparse rows of `T`: `(column, coefficient)` pairs, column-sorted.
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Arrival coefficients used by the moving-flag and distance couplings.
    pub arrival: ArrivalTensor,
}

impl TransitMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_i * (self.n_k - 1)
    }

    pub fn n_cols(&self) -> usize {
        self.n_i * self.n_k
    }

    /// Evaluates `T · m` for a dense 0/1 connection vector (length
    /// `N_I·N_K`, laid out `m_1^1 … m_{N_I}^1, m_1^2 …`).
    pub fn apply(&self, m: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * m[c]).sum())
            .collect()
    }
}

/// Builds `T` from the arrival tensor and the path table.
///
/// Block-row `k` (for `k = 1..N_K−1`) holds the identity at block-column `k`
/// and the scaled exclusion blocks at block-columns `k+τ`, `τ = 1..Γ`,
/// truncated at the horizon edge.
pub fn build_transit_matrix(f: &ArrivalTensor, paths: &PathTable) -> TransitMatrix {
    let n_i = paths.n_i;
    let n_k = paths.n_k;
    let gamma_max = paths.gamma_max();
    let scale = if gamma_max == 0 { 0.0 } else { 1.0 / (n_i as f64 * gamma_max as f64) };
    let mut rows = Vec::with_capacity(n_i * (n_k - 1));
    for k in 0..n_k - 1 {
        for i in 0..n_i {
            let mut row = vec![(k * n_i + i, 1.0)];
            for tau in 1..=gamma_max as usize {
                if k + tau > n_k - 1 {
                    break;
                }
                for j in 0..n_i {
                    if j != i && (tau as u32) <= paths.gamma(k, i, j) {
                        row.push(((k + tau) * n_i + j, scale));
                    }
                }
            }
            row.sort_by_key(|&(c, _)| c);
            rows.push(row);
        }
    }
    TransitMatrix { n_i, n_k, gamma_max, scale, rows, arrival: f.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Station, StationMap};
    use crate::transit::{edge_travel_times, fastest_paths, RoadEdge, RoadNetwork};

    /// Two stations, constant gamma = 1 in both directions.
    fn two_station_paths(n_k: usize) -> PathTable {
        let road = RoadNetwork {
            nodes: vec![1, 2],
            edges: vec![
                RoadEdge { a: 1, b: 2, length_km: 5.0, speed_kmh: vec![30.0; n_k] },
                RoadEdge { a: 2, b: 1, length_km: 5.0, speed_kmh: vec![30.0; n_k] },
            ],
        };
        let times = edge_travel_times(&road).unwrap();
        let st = StationMap {
            stations: vec![
                Station { id: 1, intersection: 1, bus: 1 },
                Station { id: 2, intersection: 2, bus: 2 },
            ],
        };
        fastest_paths(&road, &times, &st, n_k, 0.25).unwrap()
    }

    #[test]
    fn tensor_marks_transit_window() {
        let paths = two_station_paths(6);
        let f = arrival_coefficients(&paths);
        assert_eq!(f.gamma_max, 1);
        // gamma = 1: exactly tau = 1 is set for an in-horizon departure.
        assert!(f.get(0, 1, 0, 1));
        assert!(!f.get(0, 1, 0, 0), "diagonal must stay zero");
    }

    #[test]
    fn late_departure_has_zero_coefficients() {
        let paths = two_station_paths(3);
        // Departing at the second-to-last step with gamma = 1 would arrive
        // at step n_k, one past the horizon.
        assert!(!paths.journey_fits(1, 0, 1));
        let f = arrival_coefficients(&paths);
        assert!(f.get(0, 1, 0, 1));
        assert!(!f.get(1, 1, 0, 1));
        assert!(!f.get(2, 1, 0, 1));
    }

    #[test]
    fn matrix_dimensions() {
        let paths = two_station_paths(3);
        let f = arrival_coefficients(&paths);
        let t = build_transit_matrix(&f, &paths);
        assert_eq!(t.n_rows(), 4); // N_I (N_K - 1) = 2 * 2
        assert_eq!(t.n_cols(), 6); // N_I N_K = 2 * 3
    }

    #[test]
    fn off_identity_scale_is_one_over_ni_gamma() {
        // N_I = 5 stations, gamma capped at 2 -> every F entry is 1/10.
        let n_k = 8;
        let mut edges = Vec::new();
        for a in 1..=5u32 {
            for b in 1..=5u32 {
                if a != b {
                    // 1 or 2 steps depending on distance.
                    let length = if (a as i32 - b as i32).abs() == 1 { 5.0 } else { 10.0 };
                    edges.push(RoadEdge { a, b, length_km: length, speed_kmh: vec![20.0; n_k] });
                }
            }
        }
        let road = RoadNetwork { nodes: vec![1, 2, 3, 4, 5], edges };
        let times = edge_travel_times(&road).unwrap();
        let st = StationMap {
            stations: (1..=5).map(|n| Station { id: n, intersection: n, bus: n }).collect(),
        };
        let paths = fastest_paths(&road, &times, &st, n_k, 0.25).unwrap();
        assert_eq!(paths.gamma_max(), 2);
        let f = arrival_coefficients(&paths);
        let t = build_transit_matrix(&f, &paths);
        assert_eq!(t.scale, 1.0 / 10.0);
        for (r, row) in t.rows.iter().enumerate() {
            let k = r / 5;
            let i = r % 5;
            for &(c, v) in row {
                if c == k * 5 + i {
                    assert_eq!(v, 1.0);
                } else {
                    assert_eq!(v, 0.1);
                }
            }
        }
    }

    #[test]
    fn layout_matches_hand_expansion() {
        // Two stations, three steps, gamma = 1 everywhere. Columns are
        // (k, j) -> 2k + j. Hand expansion of the exclusion rule:
        //   row (k=0, i=0): m_0^0 + s * m_1^1 <= 1
        //   row (k=0, i=1): m_1^0 + s * m_0^1 <= 1
        //   row (k=1, i=0): m_0^1 + s * m_1^2 <= 1
        //   row (k=1, i=1): m_1^1 + s * m_0^2 <= 1
        // with s = 1/(2*1) = 0.5.
        let paths = two_station_paths(3);
        let f = arrival_coefficients(&paths);
        let t = build_transit_matrix(&f, &paths);
        let expected: Vec<Vec<(usize, f64)>> = vec![
            vec![(0, 1.0), (3, 0.5)],
            vec![(1, 1.0), (2, 0.5)],
            vec![(2, 1.0), (5, 0.5)],
            vec![(3, 1.0), (4, 0.5)],
        ];
        assert_eq!(t.rows, expected);
    }

    #[test]
    fn apply_detects_early_reconnection() {
        let paths = two_station_paths(3);
        let f = arrival_coefficients(&paths);
        let t = build_transit_matrix(&f, &paths);

        // Parked at station 0 the whole day: all rows at most 1.
        let parked = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        assert!(t.apply(&parked).iter().all(|&v| v <= 1.0));

        // Teleport: at station 0 at step 0, at station 1 at step 1.
        let teleport = vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        assert!(t.apply(&teleport).iter().any(|&v| v > 1.0));

        // Never connected: rows evaluate to zero.
        let empty = vec![0.0; 6];
        assert!(t.apply(&empty).iter().all(|&v| v == 0.0));
    }
}
