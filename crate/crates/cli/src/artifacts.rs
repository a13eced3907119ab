//! On-disk run artifacts: schedule.csv, summary.json, compare tables.
//!
//! Formatting is fixed-precision so identical runs produce byte-identical
//! files. Wall-clock times never appear in artifacts.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use mesdopt_core::scenario::Scenario;
use mesdopt_core::scheduler::{
    Departure, MesdSchedule, Position, Schedule, SolverStats,
};
use mesdopt_core::{CoreError, Result};

/// Writes `schedule.csv`: one row per (unit, step).
pub fn write_schedule_csv(schedule: &Schedule, scenario: &Scenario, path: &Path) -> Result<()> {
    let mut out = String::from(
        "mesd,step,station,moving,discharge_mode,p_kw,q_kvar,p_c_kw,p_d_kw,soc,z_km,depart_to,depart_gamma,depart_km\n",
    );
    for (s, ms) in schedule.per_mesd.iter().enumerate() {
        for k in 0..schedule.n_k {
            let station = match ms.position[k] {
                Position::Station(i) => scenario.stations.stations[i].id.to_string(),
                Position::Transit => "transit".to_string(),
            };
            let dep = ms.departures.iter().find(|d| d.k == k);
            out.push_str(&format!(
                "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.9},{:.6},{},{},{}\n",
                s,
                k + 1,
                station,
                ms.y[k] as u8,
                ms.w[k] as u8,
                ms.p_kw[k],
                ms.q_kvar[k],
                ms.p_c_kw[k],
                ms.p_d_kw[k],
                ms.soc[k],
                ms.z_km[k],
                dep.map(|d| scenario.stations.stations[d.to].id.to_string()).unwrap_or_default(),
                dep.map(|d| d.gamma.to_string()).unwrap_or_default(),
                dep.map(|d| format!("{:.6}", d.dist_km)).unwrap_or_default(),
            ));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads `schedule.csv` back. `summary` supplies the per-step loss increments
/// and cost breakdown that the CSV does not carry.
pub fn read_schedule_csv(path: &Path, scenario: &Scenario, summary: &RunSummary) -> Result<Schedule> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::parse(path.display().to_string(), e.to_string()))?;
    let mut lines = text.lines().enumerate();
    let ctx = path.display().to_string();
    match lines.next() {
        Some((_, h)) if h.starts_with("mesd,step,station") => {}
        _ => return Err(CoreError::parse(&ctx, "missing schedule header".to_string())),
    }
    let n_k = scenario.n_k;
    let n_s = scenario.n_s();
    let blank = || MesdSchedule {
        position: vec![Position::Transit; n_k],
        departures: Vec::new(),
        w: vec![false; n_k],
        y: vec![false; n_k],
        z_km: vec![0.0; n_k],
        p_kw: vec![0.0; n_k],
        q_kvar: vec![0.0; n_k],
        p_c_kw: vec![0.0; n_k],
        p_d_kw: vec![0.0; n_k],
        soc: vec![0.0; n_k],
    };
    let mut per_mesd: Vec<MesdSchedule> = (0..n_s).map(|_| blank()).collect();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = lineno + 1;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 14 {
            return Err(CoreError::parse(&ctx, format!("row {row}: expected 14 columns, got {}", cols.len())));
        }
        let fail = |what: &str| CoreError::parse(&ctx, format!("row {row}: bad {what}"));
        let s: usize = cols[0].parse().map_err(|_| fail("mesd index"))?;
        let k1: usize = cols[1].parse().map_err(|_| fail("step"))?;
        if s >= n_s || k1 < 1 || k1 > n_k {
            return Err(CoreError::parse(&ctx, format!("row {row}: index out of range")));
        }
        let k = k1 - 1;
        let ms = &mut per_mesd[s];
        ms.position[k] = if cols[2] == "transit" {
            Position::Transit
        } else {
            let id: u32 = cols[2].parse().map_err(|_| fail("station"))?;
            let idx = scenario
                .station_index(id)
                .ok_or_else(|| CoreError::parse(&ctx, format!("row {row}: unknown station {id}")))?;
            Position::Station(idx)
        };
        ms.y[k] = cols[3] == "1";
        ms.w[k] = cols[4] == "1";
        ms.p_kw[k] = cols[5].parse().map_err(|_| fail("p_kw"))?;
        ms.q_kvar[k] = cols[6].parse().map_err(|_| fail("q_kvar"))?;
        ms.p_c_kw[k] = cols[7].parse().map_err(|_| fail("p_c_kw"))?;
        ms.p_d_kw[k] = cols[8].parse().map_err(|_| fail("p_d_kw"))?;
        ms.soc[k] = cols[9].parse().map_err(|_| fail("soc"))?;
        ms.z_km[k] = cols[10].parse().map_err(|_| fail("z_km"))?;
        if !cols[11].is_empty() {
            let to_id: u32 = cols[11].parse().map_err(|_| fail("depart_to"))?;
            let to = scenario
                .station_index(to_id)
                .ok_or_else(|| CoreError::parse(&ctx, format!("row {row}: unknown station {to_id}")))?;
            let from = match ms.position[k] {
                Position::Station(i) => i,
                Position::Transit => {
                    return Err(CoreError::parse(&ctx, format!("row {row}: departure while in transit")))
                }
            };
            ms.departures.push(Departure {
                k,
                from,
                to,
                gamma: cols[12].parse().map_err(|_| fail("depart_gamma"))?,
                dist_km: cols[13].parse().map_err(|_| fail("depart_km"))?,
            });
        }
    }
    Ok(Schedule {
        n_k,
        t_unit_h: scenario.t_unit_h,
        per_mesd,
        dp_loss_kw: summary.per_step.dp_loss_kw.clone(),
        dv_pu: Vec::new(),
        dl_kva: Vec::new(),
        objective: summary.objective,
        baseline_cost: summary.baseline_cost,
        loss_term: summary.loss_term,
        transit_term: summary.transit_term,
        j_total: summary.j_total,
        e_loss_tot_kwh: summary.e_loss_tot_kwh,
        solver: SolverStats {
            status: parse_status(&summary.solver.status)?,
            nodes: summary.solver.nodes,
            simplex_iterations: summary.solver.simplex_iterations,
            gap: summary.solver.gap,
        },
    })
}

fn parse_status(s: &str) -> Result<mesdopt_core::SolveStatus> {
    use mesdopt_core::SolveStatus::*;
    Ok(match s {
        "optimal" => Optimal,
        "infeasible" => Infeasible,
        "unbounded" => Unbounded,
        "gap_limit" => GapLimit,
        "node_limit" => NodeLimit,
        "time_limit" => TimeLimit,
        other => return Err(CoreError::parse("summary.json", format!("unknown status `{other}`"))),
    })
}

/// Deterministic solver statistics in the summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSummary {
    pub status: String,
    pub nodes: u64,
    pub simplex_iterations: u64,
    pub gap: f64,
}

/// Per-step arrays carried by the summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerStep {
    pub dp_loss_kw: Vec<f64>,
    pub price_per_kwh: Vec<f64>,
}

/// `summary.json` contents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub case: String,
    pub objective: f64,
    pub baseline_cost: f64,
    pub loss_term: f64,
    pub transit_term: f64,
    #[serde(rename = "J")]
    pub j_total: f64,
    pub e_loss_tot_kwh: f64,
    pub transit_counts: Vec<usize>,
    pub solver: SolverSummary,
    pub per_step: PerStep,
}

impl RunSummary {
    pub fn from_schedule(schedule: &Schedule, scenario: &Scenario, case: &str) -> RunSummary {
        RunSummary {
            scenario: scenario.name.clone(),
            case: case.to_string(),
            objective: schedule.objective,
            baseline_cost: schedule.baseline_cost,
            loss_term: schedule.loss_term,
            transit_term: schedule.transit_term,
            j_total: schedule.j_total,
            e_loss_tot_kwh: schedule.e_loss_tot_kwh,
            transit_counts: schedule.e_counts(),
            solver: SolverSummary {
                status: schedule.solver.status.as_str().to_string(),
                nodes: schedule.solver.nodes,
                simplex_iterations: schedule.solver.simplex_iterations,
                gap: schedule.solver.gap,
            },
            per_step: PerStep {
                dp_loss_kw: schedule.dp_loss_kw.clone(),
                price_per_kwh: scenario.price_per_kwh.clone(),
            },
        }
    }
}

pub fn write_summary(summary: &RunSummary, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(summary)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::parse(path.display().to_string(), e.to_string()))?;
    Ok(serde_json::from_str(&text)?)
}

/// One row of the strategy-comparison table.
#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub case: String,
    pub e_loss_tot_kwh: f64,
    #[serde(rename = "J")]
    pub j_total: f64,
    /// Reduction achieved by case 1 relative to this row: (x − 1)/x.
    pub reduction_vs_case1_pct: Option<f64>,
}

/// Reduction rate of `better` relative to `worse`: `(worse − better)/worse`,
/// in percent.
pub fn reduction_pct(better: f64, worse: f64) -> f64 {
    100.0 * (worse - better) / worse
}

pub fn write_compare(rows: &[CompareRow], dir: &Path) -> Result<()> {
    let mut csv = String::from("case,e_loss_tot_kwh,J,reduction_vs_case1_pct\n");
    for r in rows {
        csv.push_str(&format!(
            "{},{:.6},{:.6},{}\n",
            r.case,
            r.e_loss_tot_kwh,
            r.j_total,
            r.reduction_vs_case1_pct
                .map(|v| format!("{v:.2}"))
                .unwrap_or_default()
        ));
    }
    std::fs::write(dir.join("compare.csv"), csv)?;
    let mut map = BTreeMap::new();
    map.insert("rows", rows);
    std::fs::write(
        dir.join("compare.json"),
        serde_json::to_string_pretty(&map)? + "\n",
    )?;
    Ok(())
}
