//! Transportation-side model: travel times, fastest paths, the transit
//! matrix and the linear journey constraints.
//!
//! All quantities here are pre-computed constants of the optimization: the
//! per-step forecast speeds fix the edge travel times, one Dijkstra pass per
//! departure step fixes the fastest station-to-station paths, and the
//! resulting step counts drive the constraint rows that make MESD journeys
//! consistent in the MILP.

mod constraints;
mod matrix;
mod paths;

pub use constraints::{
    emit_connection_constraints, emit_flag_constraints, FlagEncoding, LinearRow, TransitLayout,
    TransitVar,
};
pub use matrix::{arrival_coefficients, build_transit_matrix, ArrivalTensor, TransitMatrix};
pub use paths::{fastest_paths, gamma_max, PathEntry, PathTable};

use crate::scenario::StationMap;
use crate::{CoreError, Result};

/// A directed road edge with a per-step speed forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadEdge {
    pub a: u32,
    pub b: u32,
    pub length_km: f64,
    /// Forecast average speed per scheduling step [km/h].
    pub speed_kmh: Vec<f64>,
}

/// Directed road graph between intersections.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoadNetwork {
    pub nodes: Vec<u32>,
    pub edges: Vec<RoadEdge>,
}

impl RoadNetwork {
    pub fn has_node(&self, id: u32) -> bool {
        self.nodes.contains(&id)
    }

    pub fn node_index(&self, id: u32) -> Option<usize> {
        self.nodes.iter().position(|&n| n == id)
    }

    /// Outgoing edge indices per node index.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (idx, e) in self.edges.iter().enumerate() {
            if let Some(a) = self.node_index(e.a) {
                adj[a].push(idx);
            }
        }
        adj
    }

    pub fn validate(&self, n_k: usize) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for &n in &self.nodes {
            if !seen.insert(n) {
                return Err(CoreError::validation(
                    "road.intersections",
                    format!("duplicate intersection id {n}"),
                ));
            }
        }
        for (idx, e) in self.edges.iter().enumerate() {
            let field = format!("road.edges[{idx}] ({} -> {})", e.a, e.b);
            if !self.has_node(e.a) || !self.has_node(e.b) {
                return Err(CoreError::validation(&field, "endpoint intersection does not exist"));
            }
            if e.a == e.b {
                return Err(CoreError::validation(&field, "self-loop edges are not allowed"));
            }
            if e.length_km <= 0.0 {
                return Err(CoreError::validation(
                    &field,
                    format!("length must be positive, got {}", e.length_km),
                ));
            }
            if e.speed_kmh.len() != n_k {
                return Err(CoreError::validation(
                    &field,
                    format!("speed profile has {} samples, expected {n_k}", e.speed_kmh.len()),
                ));
            }
            for (k, &v) in e.speed_kmh.iter().enumerate() {
                if v <= 0.0 {
                    return Err(CoreError::validation(
                        &field,
                        format!("speed must be positive at step {k}, got {v}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Per-edge, per-step travel times `p_ab^k = d_ab / v_ab^k` [h].
#[derive(Debug, Clone, PartialEq)]
pub struct TravelTimeTable {
    /// `hours[edge][k]`.
    pub hours: Vec<Vec<f64>>,
}

/// Computes the edge travel-time table from the per-step speed forecast.
pub fn edge_travel_times(road: &RoadNetwork) -> Result<TravelTimeTable> {
    let mut hours = Vec::with_capacity(road.edges.len());
    for (idx, e) in road.edges.iter().enumerate() {
        let mut row = Vec::with_capacity(e.speed_kmh.len());
        for (k, &v) in e.speed_kmh.iter().enumerate() {
            if v <= 0.0 {
                return Err(CoreError::validation(
                    format!("road.edges[{idx}] ({} -> {})", e.a, e.b),
                    format!("speed must be positive at step {k}, got {v}"),
                ));
            }
            row.push(e.length_km / v);
        }
        hours.push(row);
    }
    Ok(TravelTimeTable { hours })
}

/// Convenience wrapper: travel times, fastest paths and the transit matrix
/// in one call.
pub fn build_transit_artifacts(
    road: &RoadNetwork,
    stations: &StationMap,
    n_k: usize,
    t_unit_h: f64,
) -> Result<(PathTable, TransitMatrix)> {
    let times = edge_travel_times(road)?;
    let paths = fastest_paths(road, &times, stations, n_k, t_unit_h)?;
    let f = arrival_coefficients(&paths);
    let tm = build_transit_matrix(&f, &paths);
    Ok((paths, tm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_edge_road(length_km: f64, speed: f64) -> RoadNetwork {
        RoadNetwork {
            nodes: vec![1, 2],
            edges: vec![RoadEdge {
                a: 1,
                b: 2,
                length_km,
                speed_kmh: vec![speed; 4],
            }],
        }
    }

    #[test]
    fn travel_time_is_distance_over_speed() {
        // 1.5 km at 30 km/h is 3 minutes.
        let t = edge_travel_times(&one_edge_road(1.5, 30.0)).unwrap();
        assert!((t.hours[0][0] - 0.05).abs() < 1e-15);
        // 1.5 km at 90 km/h is 1 minute.
        let t = edge_travel_times(&one_edge_road(1.5, 90.0)).unwrap();
        assert!((t.hours[0][0] - 1.0 / 60.0).abs() < 1e-15);
    }

    #[test]
    fn zero_speed_is_a_validation_error() {
        let mut road = one_edge_road(1.5, 30.0);
        road.edges[0].speed_kmh[2] = 0.0;
        let err = edge_travel_times(&road).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("step 2"), "{msg}");
        assert!(msg.contains("1 -> 2"), "{msg}");
    }
}
