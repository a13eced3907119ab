//! Shipped-scenario integrity: loading, the documented fixture values, and
//! power-flow quality on every feeder.

use mesdopt_core::grid::run_power_flow;
use mesdopt_core::scenario::{load_scenario, load_scenario_with, save_scenario, LoadOptions};
use mesdopt_core::transit::build_transit_artifacts;

fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

#[test]
fn default_scenario_matches_documented_fixture() {
    let sc = load_scenario(scenario_path("default.json")).unwrap();
    assert_eq!(sc.n_i(), 5);
    let buses: Vec<u32> = sc.stations.stations.iter().map(|s| s.bus).collect();
    assert_eq!(buses, vec![6, 11, 19, 28, 31]);
    let m1 = &sc.fleet[0];
    assert_eq!(m1.p_max_kw, 500.0);
    assert_eq!(m1.e_cap_kwh, 5000.0);
    assert_eq!(m1.pf_min, 0.95);
    assert_eq!(m1.eta_transit_kwh_per_km, 0.5);
    assert_eq!(sc.n_v(), 34);
}

#[test]
fn dangling_station_reference_names_the_station() {
    let text = std::fs::read_to_string(scenario_path("desk.json")).unwrap();
    let patched = text.replace("\"bus\": 8", "\"bus\": 99");
    let dir = std::env::temp_dir().join("mesdopt_bad_scenario");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    std::fs::write(&path, patched).unwrap();
    let err = load_scenario(&path).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("nonexistent bus 99"), "{msg}");
    assert!(msg.contains("stations"), "{msg}");
}

#[test]
fn save_load_roundtrip_is_identity() {
    for name in ["default.json", "desk.json"] {
        let sc = load_scenario(scenario_path(name)).unwrap();
        let dir = std::env::temp_dir().join("mesdopt_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        save_scenario(&sc, &path).unwrap();
        let back = load_scenario(&path).unwrap();
        assert_eq!(back, sc, "round trip changed {name}");
    }
}

#[test]
fn power_flow_quality_on_all_shipped_feeders() {
    for name in ["default.json", "desk.json", "paper_scale.json", "large_123.json"] {
        let sc = load_scenario(scenario_path(name)).unwrap();
        for k in 0..sc.n_k {
            let sol = run_power_flow(&sc.grid, k, None, None)
                .unwrap_or_else(|e| panic!("{name} step {k}: {e}"));
            assert!(sol.mismatch <= 1e-8, "{name} step {k}: mismatch {}", sol.mismatch);
            assert!(sol.iterations <= 20, "{name} step {k}: {} iterations", sol.iterations);
            let loss_gap = (sol.p_loss_kw - sol.p_loss_lines_kw).abs() / sc.grid.s_base_kva;
            assert!(loss_gap <= 1e-6, "{name} step {k}: loss disagreement {loss_gap} pu");
            assert!(
                sol.vm.iter().all(|&v| v > 0.85 && v < 1.1),
                "{name} step {k}: voltage out of plausible range"
            );
        }
    }
}

#[test]
fn shipped_transit_tables_are_nontrivial() {
    for (name, max_gamma) in [("default.json", 2u32), ("desk.json", 2), ("paper_scale.json", 3)] {
        let sc = load_scenario(scenario_path(name)).unwrap();
        let (paths, tm) = build_transit_artifacts(&sc.road, &sc.stations, sc.n_k, sc.t_unit_h).unwrap();
        assert!(paths.gamma_max() >= 1, "{name}: no transit time at all");
        assert!(
            paths.gamma_max() <= max_gamma,
            "{name}: gamma_max {} exceeds design target {max_gamma}",
            paths.gamma_max()
        );
        assert_eq!(tm.n_rows(), sc.n_i() * (sc.n_k - 1));
        // The gamma tables of shipped scenarios must be FIFO: waiting one
        // step never lets a journey arrive earlier than departing now.
        for k in 0..sc.n_k - 1 {
            for i in 0..sc.n_i() {
                for j in 0..sc.n_i() {
                    if i != j {
                        assert!(
                            (k + 1) + paths.gamma(k + 1, i, j) as usize
                                >= k + paths.gamma(k, i, j) as usize,
                            "{name}: non-FIFO gamma at (k={k}, {i}->{j})"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn nk_override_rescales_the_grid_step() {
    let opts = LoadOptions { nk_override: Some(48) };
    let sc = load_scenario_with(scenario_path("default.json"), &opts).unwrap();
    assert_eq!(sc.n_k, 48);
    assert!((sc.t_unit_h - 0.5).abs() < 1e-12);
    assert_eq!(sc.price_per_kwh.len(), 48);
    sc.validate().unwrap();
}
