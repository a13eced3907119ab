//! Time-dependent fastest paths between stations.
//!
//! For each departure step `k`, edge travel times are frozen at their step-k
//! forecast and one Dijkstra pass per source station finds the
//! minimum-total-time route to every other station. No en-route
//! re-evaluation happens: a journey departing at `k` is costed entirely at
//! step-k speeds. Ties on total time are broken by smaller total distance,
//! then by the lexicographically smallest intersection sequence.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::scenario::StationMap;
use crate::{CoreError, Result};

use super::{RoadNetwork, TravelTimeTable};

/// Relative tolerance for comparing accumulated path times/distances.
const SUM_TOL: f64 = 1e-12;

/// Tolerance used when the time/`t_unit` ratio sits on an integer boundary:
/// an exact multiple of the unit interval rounds to that integer instead of
/// ceiling up.
const CEIL_TOL: f64 = 1e-9;

/// Fastest-path result for one (departure step, station pair).
#[derive(Debug, Clone, PartialEq)]
pub struct PathEntry {
    /// Total distance along the fastest path [km].
    pub dist_km: f64,
    /// Total travel time at frozen step-k speeds [h].
    pub time_h: f64,
    /// Whole scheduling steps needed for the journey (`ceil(time/t_unit)`).
    pub gamma: u32,
    /// Intersection sequence from origin to destination (inclusive).
    pub nodes: Vec<u32>,
}

impl PathEntry {
    /// The path as an ordered list of directed edges `(a, b)`.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        self.nodes.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Fastest paths for every ordered station pair and departure step,
/// together with the maximum transit interval Γ.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTable {
    pub n_i: usize,
    pub n_k: usize,
    pub t_unit_h: f64,
    entries: Vec<PathEntry>,
    gamma_max: u32,
}

impl PathTable {
    pub fn entry(&self, k: usize, i: usize, j: usize) -> &PathEntry {
        &self.entries[(k * self.n_i + i) * self.n_i + j]
    }

    /// Distance `d_ij^k` [km].
    pub fn dist(&self, k: usize, i: usize, j: usize) -> f64 {
        self.entry(k, i, j).dist_km
    }

    /// Normalized transit interval `γ_ij^k` in steps.
    pub fn gamma(&self, k: usize, i: usize, j: usize) -> u32 {
        self.entry(k, i, j).gamma
    }

    /// Maximum `γ_ij^k` over all pairs and steps.
    pub fn gamma_max(&self) -> u32 {
        self.gamma_max
    }

    /// Whether a journey departing at step `k` (0-based) from `i` to `j`
    /// completes inside the horizon, i.e. the arrival step `k + γ + 1`
    /// exists.
    pub fn journey_fits(&self, k: usize, i: usize, j: usize) -> bool {
        i != j && k + self.gamma(k, i, j) as usize + 1 <= self.n_k - 1
    }
}

/// Maximum transit interval Γ of a path table.
pub fn gamma_max(paths: &PathTable) -> u32 {
    paths.gamma_max
}

fn ceil_steps(time_h: f64, t_unit_h: f64) -> u32 {
    let q = time_h / t_unit_h;
    let r = q.round();
    let steps = if (q - r).abs() <= CEIL_TOL * q.abs().max(1.0) {
        r
    } else {
        q.ceil()
    };
    steps.max(1.0) as u32
}

#[derive(Clone, Copy, PartialEq)]
struct Label {
    time: f64,
    dist: f64,
}

fn cmp_tol(a: f64, b: f64) -> Ordering {
    if a == b {
        return Ordering::Equal;
    }
    if !a.is_finite() || !b.is_finite() {
        return a.total_cmp(&b);
    }
    let tol = SUM_TOL * a.abs().max(b.abs()).max(1.0);
    if a < b - tol {
        Ordering::Less
    } else if a > b + tol {
        Ordering::Greater
    } else {
        Ordering::Equal
    }
}

impl Label {
    fn cmp_lex(&self, other: &Label) -> Ordering {
        cmp_tol(self.time, other.time).then(cmp_tol(self.dist, other.dist))
    }
}

struct HeapItem {
    label: Label,
    node: usize,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the smallest label.
        other
            .label
            .time
            .total_cmp(&self.label.time)
            .then(other.label.dist.total_cmp(&self.label.dist))
            .then(other.node.cmp(&self.node))
    }
}

/// One Dijkstra pass over edge times frozen at step `k`.
///
/// `edge_time(e)` must return the frozen travel time of edge index `e`.
/// If `reversed`, edges are traversed backwards.
fn dijkstra(
    road: &RoadNetwork,
    adj: &[Vec<usize>],
    radj: &[Vec<usize>],
    edge_time: &dyn Fn(usize) -> f64,
    source: usize,
    reversed: bool,
) -> Vec<Label> {
    let n = road.nodes.len();
    let mut labels = vec![Label { time: f64::INFINITY, dist: f64::INFINITY }; n];
    labels[source] = Label { time: 0.0, dist: 0.0 };
    let mut heap = BinaryHeap::new();
    heap.push(HeapItem { label: labels[source], node: source });
    while let Some(HeapItem { label, node }) = heap.pop() {
        if label.cmp_lex(&labels[node]) == Ordering::Greater {
            continue;
        }
        let out = if reversed { &radj[node] } else { &adj[node] };
        for &e in out {
            let edge = &road.edges[e];
            let next = if reversed {
                road.node_index(edge.a).unwrap()
            } else {
                road.node_index(edge.b).unwrap()
            };
            let cand = Label {
                time: labels[node].time + edge_time(e),
                dist: labels[node].dist + edge.length_km,
            };
            if cand.cmp_lex(&labels[next]) == Ordering::Less {
                labels[next] = cand;
                heap.push(HeapItem { label: cand, node: next });
            }
        }
    }
    labels
}

/// Reconstructs the lexicographically smallest intersection sequence among
/// all paths that achieve the optimal (time, distance) label.
///
/// `fwd` are labels from the source, `rev` labels to the target on the
/// reversed graph. A node lies on an optimal path iff its forward and
/// reverse labels add up to the target label; the walk greedily picks the
/// smallest-id successor that stays on an optimal path.
fn reconstruct_lex_path(
    road: &RoadNetwork,
    adj: &[Vec<usize>],
    edge_time: &dyn Fn(usize) -> f64,
    fwd: &[Label],
    rev: &[Label],
    source: usize,
    target: usize,
) -> Vec<u32> {
    let total = fwd[target];
    let on_optimal = |v: usize| -> bool {
        cmp_tol(fwd[v].time + rev[v].time, total.time) == Ordering::Equal
            && cmp_tol(fwd[v].dist + rev[v].dist, total.dist) == Ordering::Equal
    };
    let mut path = vec![road.nodes[source]];
    let mut cur = source;
    while cur != target {
        let mut best: Option<(u32, usize)> = None;
        for &e in &adj[cur] {
            let edge = &road.edges[e];
            let next = road.node_index(edge.b).unwrap();
            let tight = cmp_tol(fwd[cur].time + edge_time(e), fwd[next].time) == Ordering::Equal
                && cmp_tol(fwd[cur].dist + edge.length_km, fwd[next].dist) == Ordering::Equal;
            if tight && on_optimal(next) {
                match best {
                    Some((id, _)) if id <= edge.b => {}
                    _ => best = Some((edge.b, next)),
                }
            }
        }
        let (id, next) = best.expect("tight successor must exist on an optimal path");
        path.push(id);
        cur = next;
    }
    path
}

/// Builds the fastest-path table for every departure step and ordered
/// station pair.
pub fn fastest_paths(
    road: &RoadNetwork,
    times: &TravelTimeTable,
    stations: &StationMap,
    n_k: usize,
    t_unit_h: f64,
) -> Result<PathTable> {
    let n_i = stations.len();
    let adj = road.adjacency();
    let mut radj = vec![Vec::new(); road.nodes.len()];
    for (idx, e) in road.edges.iter().enumerate() {
        if let Some(b) = road.node_index(e.b) {
            radj[b].push(idx);
        }
    }
    let station_nodes: Vec<usize> = stations
        .stations
        .iter()
        .map(|st| {
            road.node_index(st.intersection).ok_or_else(|| {
                CoreError::validation(
                    format!("stations (id {})", st.id),
                    format!("intersection {} not in road network", st.intersection),
                )
            })
        })
        .collect::<Result<_>>()?;

    let mut entries = Vec::with_capacity(n_k * n_i * n_i);
    let mut gamma_max = 0u32;
    for k in 0..n_k {
        let edge_time = |e: usize| times.hours[e][k];
        let fwd_all: Vec<Vec<Label>> = station_nodes
            .iter()
            .map(|&src| dijkstra(road, &adj, &radj, &edge_time, src, false))
            .collect();
        let rev_all: Vec<Vec<Label>> = station_nodes
            .iter()
            .map(|&dst| dijkstra(road, &adj, &radj, &edge_time, dst, true))
            .collect();
        for i in 0..n_i {
            for j in 0..n_i {
                if i == j {
                    entries.push(PathEntry {
                        dist_km: 0.0,
                        time_h: 0.0,
                        gamma: 0,
                        nodes: vec![road.nodes[station_nodes[i]]],
                    });
                    continue;
                }
                let target = station_nodes[j];
                if !fwd_all[i][target].time.is_finite() {
                    return Err(CoreError::Unreachable { from: i, to: j, step: k });
                }
                let nodes = reconstruct_lex_path(
                    road,
                    &adj,
                    &edge_time,
                    &fwd_all[i],
                    &rev_all[j],
                    station_nodes[i],
                    target,
                );
                // Re-accumulate along the reconstructed path so the stored
                // time/distance are exactly the path sums.
                let mut time_h = 0.0;
                let mut dist_km = 0.0;
                for w in nodes.windows(2) {
                    let e = road
                        .edges
                        .iter()
                        .position(|e| e.a == w[0] && e.b == w[1])
                        .expect("path edge exists");
                    time_h += times.hours[e][k];
                    dist_km += road.edges[e].length_km;
                }
                let gamma = ceil_steps(time_h, t_unit_h);
                gamma_max = gamma_max.max(gamma);
                entries.push(PathEntry { dist_km, time_h, gamma, nodes });
            }
        }
    }
    Ok(PathTable { n_i, n_k, t_unit_h, entries, gamma_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Station;
    use crate::transit::{edge_travel_times, RoadEdge};

    fn stations(ids: &[(u32, u32)]) -> StationMap {
        StationMap {
            stations: ids
                .iter()
                .enumerate()
                .map(|(n, &(intersection, bus))| Station { id: n as u32 + 1, intersection, bus })
                .collect(),
        }
    }

    /// Bidirectional edge helper with a constant speed profile.
    fn edge(a: u32, b: u32, length_km: f64, speed: f64, n_k: usize) -> Vec<RoadEdge> {
        vec![
            RoadEdge { a, b, length_km, speed_kmh: vec![speed; n_k] },
            RoadEdge { a: b, b: a, length_km, speed_kmh: vec![speed; n_k] },
        ]
    }

    #[test]
    fn triangle_detour_beats_slow_direct_edge() {
        // At every step: 1->2 takes 3 min, 2->3 takes 3 min, 1->3 takes
        // 10 min. The two-hop route wins with 6 minutes total.
        let n_k = 4;
        let mut edges = Vec::new();
        edges.extend(edge(1, 2, 1.5, 30.0, n_k)); // 3 min
        edges.extend(edge(2, 3, 1.5, 30.0, n_k)); // 3 min
        edges.extend(edge(1, 3, 2.0, 12.0, n_k)); // 10 min
        let road = RoadNetwork { nodes: vec![1, 2, 3], edges };
        let times = edge_travel_times(&road).unwrap();
        let st = stations(&[(1, 1), (3, 2)]);
        let paths = fastest_paths(&road, &times, &st, n_k, 0.25).unwrap();

        let entry = paths.entry(0, 0, 1);
        assert_eq!(entry.nodes, vec![1, 2, 3]);
        assert!((entry.time_h - 0.1).abs() < 1e-12);
        assert!((entry.dist_km - 3.0).abs() < 1e-12);
        assert_eq!(entry.gamma, 1);
    }

    #[test]
    fn diagonal_is_zero() {
        let road = RoadNetwork { nodes: vec![1, 2], edges: edge(1, 2, 1.5, 30.0, 3) };
        let times = edge_travel_times(&road).unwrap();
        let st = stations(&[(1, 1), (2, 2)]);
        let paths = fastest_paths(&road, &times, &st, 3, 0.25).unwrap();
        assert_eq!(paths.dist(1, 0, 0), 0.0);
        assert_eq!(paths.gamma(1, 0, 0), 0);
    }

    #[test]
    fn gamma_is_ceiling_of_time_over_unit() {
        // 20 minutes at 15-minute steps needs 2 steps.
        let road = RoadNetwork { nodes: vec![1, 2], edges: edge(1, 2, 10.0, 30.0, 2) };
        let times = edge_travel_times(&road).unwrap();
        let st = stations(&[(1, 1), (2, 2)]);
        let paths = fastest_paths(&road, &times, &st, 2, 0.25).unwrap();
        assert_eq!(paths.gamma(0, 0, 1), 2);
    }

    #[test]
    fn gamma_at_exact_multiple_does_not_round_up() {
        // 30 minutes at 15-minute steps is exactly 2 steps, even when the
        // floating-point sum lands a hair above 0.5 h.
        let n_k = 2;
        let mut edges = Vec::new();
        edges.extend(edge(1, 2, 2.5, 30.0, n_k));
        edges.extend(edge(2, 3, 5.0, 30.0, n_k));
        edges.extend(edge(3, 4, 7.5, 30.0, n_k));
        let road = RoadNetwork { nodes: vec![1, 2, 3, 4], edges };
        let times = edge_travel_times(&road).unwrap();
        let st = stations(&[(1, 1), (4, 2)]);
        let paths = fastest_paths(&road, &times, &st, n_k, 0.25).unwrap();
        assert_eq!(paths.gamma(0, 0, 1), 2);
    }

    #[test]
    fn equal_time_tie_prefers_smaller_distance_then_lex() {
        // Two routes 1->4 both take 6 min: via 2 (3.0 km) and via 3
        // (2.0 km). The shorter route via 3 must win even though node 2
        // sorts first.
        let n_k = 2;
        let mut edges = Vec::new();
        edges.extend(edge(1, 2, 1.5, 30.0, n_k));
        edges.extend(edge(2, 4, 1.5, 30.0, n_k));
        edges.extend(edge(1, 3, 1.0, 20.0, n_k));
        edges.extend(edge(3, 4, 1.0, 20.0, n_k));
        let road = RoadNetwork { nodes: vec![1, 2, 3, 4], edges };
        let times = edge_travel_times(&road).unwrap();
        let st = stations(&[(1, 1), (4, 2)]);
        let paths = fastest_paths(&road, &times, &st, n_k, 0.25).unwrap();
        assert_eq!(paths.entry(0, 0, 1).nodes, vec![1, 3, 4]);

        // Make both routes identical in time and distance: lexicographic
        // order on the node sequence breaks the tie (via 2 < via 3).
        let mut edges = Vec::new();
        edges.extend(edge(1, 2, 1.5, 30.0, n_k));
        edges.extend(edge(2, 4, 1.5, 30.0, n_k));
        edges.extend(edge(1, 3, 1.5, 30.0, n_k));
        edges.extend(edge(3, 4, 1.5, 30.0, n_k));
        let road = RoadNetwork { nodes: vec![1, 2, 3, 4], edges };
        let times = edge_travel_times(&road).unwrap();
        let paths = fastest_paths(&road, &times, &st, n_k, 0.25).unwrap();
        assert_eq!(paths.entry(0, 0, 1).nodes, vec![1, 2, 4]);
    }

    #[test]
    fn unreachable_pair_is_an_error() {
        // Directed edge 1->2 only: station 2 cannot reach station 1.
        let road = RoadNetwork {
            nodes: vec![1, 2],
            edges: vec![RoadEdge { a: 1, b: 2, length_km: 1.0, speed_kmh: vec![30.0; 2] }],
        };
        let times = edge_travel_times(&road).unwrap();
        let st = stations(&[(1, 1), (2, 2)]);
        let err = fastest_paths(&road, &times, &st, 2, 0.25).unwrap_err();
        match err {
            CoreError::Unreachable { from: 1, to: 0, step: 0 } => {}
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn speeds_vary_by_step() {
        let road = RoadNetwork {
            nodes: vec![1, 2],
            edges: vec![
                RoadEdge { a: 1, b: 2, length_km: 10.0, speed_kmh: vec![40.0, 20.0] },
                RoadEdge { a: 2, b: 1, length_km: 10.0, speed_kmh: vec![40.0, 20.0] },
            ],
        };
        let times = edge_travel_times(&road).unwrap();
        let st = stations(&[(1, 1), (2, 2)]);
        let paths = fastest_paths(&road, &times, &st, 2, 0.25).unwrap();
        assert_eq!(paths.gamma(0, 0, 1), 1); // 15 min
        assert_eq!(paths.gamma(1, 0, 1), 2); // 30 min
        assert_eq!(paths.gamma_max(), 2);
    }
}
