//! Subcommand implementations.

use std::path::{Path, PathBuf};

use mesdopt_core::milp::write_lp;
use mesdopt_core::scenario::{load_scenario_with, LoadOptions, Scenario};
use mesdopt_core::scheduler::{
    assemble, solve_case1, solve_case2_stationary, solve_case3_pev, zero_output_schedule,
    AssembleMode, CaseResult, Precomputed,
};
use mesdopt_core::validator::replay;
use mesdopt_core::{Result, SolveStatus};

use crate::artifacts::{
    read_schedule_csv, read_summary, reduction_pct, write_compare, write_schedule_csv,
    write_summary, CompareRow, RunSummary,
};
use crate::svg::{position_chart, step_chart, Series};

/// Strategy selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseSelect {
    Case1,
    Case2,
    Case3,
}

impl CaseSelect {
    pub fn label(&self) -> &'static str {
        match self {
            CaseSelect::Case1 => "case1",
            CaseSelect::Case2 => "case2",
            CaseSelect::Case3 => "case3",
        }
    }
}

/// One run's configuration (mirrors the CLI flags).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: PathBuf,
    pub case: CaseSelect,
    pub out_dir: PathBuf,
    pub gap: Option<f64>,
    pub time_limit_s: Option<f64>,
    pub nk_override: Option<usize>,
    /// (mesd index, station id) pins.
    pub pin_start: Vec<(usize, u32)>,
    pub export_only: bool,
    pub dump_transit: bool,
    pub dump_sensitivities: bool,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn new(scenario: impl Into<PathBuf>, case: CaseSelect, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            scenario: scenario.into(),
            case,
            out_dir: out_dir.into(),
            gap: None,
            time_limit_s: None,
            nk_override: None,
            pin_start: Vec::new(),
            export_only: false,
            dump_transit: false,
            dump_sensitivities: false,
            threads: None,
        }
    }

    fn load(&self) -> Result<Scenario> {
        let opts = LoadOptions { nk_override: self.nk_override };
        let mut sc = load_scenario_with(&self.scenario, &opts)?;
        if let Some(gap) = self.gap {
            sc.options.gap = gap;
        }
        if let Some(t) = self.time_limit_s {
            sc.options.time_limit_s = t;
        }
        if let Some(threads) = self.threads {
            sc.options.threads = threads;
        }
        for &(s, id) in &self.pin_start {
            sc.options.pin_start.insert(s, id);
        }
        sc.validate()?;
        Ok(sc)
    }
}

fn run_case(scenario: &Scenario, pre: &Precomputed, case: CaseSelect) -> Result<CaseResult> {
    match case {
        CaseSelect::Case1 => solve_case1(scenario, pre),
        CaseSelect::Case2 => solve_case2_stationary(scenario, pre),
        CaseSelect::Case3 => solve_case3_pev(scenario, pre, None),
    }
}

/// `solve`: writes `schedule.csv`, `summary.json` and optionally `model.lp`.
/// Returns the solve status for exit-code mapping.
pub fn cmd_solve(config: &RunConfig) -> Result<SolveStatus> {
    let scenario = config.load()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let pre = Precomputed::build(&scenario)?;

    if config.dump_transit {
        dump_transit(&scenario, &pre, &config.out_dir)?;
    }
    if config.dump_sensitivities {
        dump_sensitivities(&pre, &config.out_dir)?;
    }
    if config.export_only {
        let mode = match config.case {
            CaseSelect::Case1 | CaseSelect::Case3 => AssembleMode::Case1,
            CaseSelect::Case2 => AssembleMode::Case2Placement,
        };
        let assembled = assemble(&scenario, &pre.bundle, &pre.paths, &pre.tm, &mode)?;
        write_lp(&assembled.model, config.out_dir.join("model.lp"))?;
        return Ok(SolveStatus::Optimal);
    }

    let result = run_case(&scenario, &pre, config.case)?;
    write_schedule_csv(&result.schedule, &scenario, &config.out_dir.join("schedule.csv"))?;
    let summary = RunSummary::from_schedule(&result.schedule, &scenario, config.case.label());
    write_summary(&summary, &config.out_dir.join("summary.json"))?;
    Ok(result.solution.status)
}

/// `export`: writes `model.lp` only.
pub fn cmd_export(config: &RunConfig) -> Result<()> {
    let mut config = config.clone();
    config.export_only = true;
    cmd_solve(&config).map(|_| ())
}

/// `compare`: solves all strategies plus the no-fleet baseline and writes the
/// comparison table.
pub fn cmd_compare(config: &RunConfig) -> Result<()> {
    let scenario = config.load()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let pre = Precomputed::build(&scenario)?;

    let c1 = run_case(&scenario, &pre, CaseSelect::Case1)?;
    let c2 = run_case(&scenario, &pre, CaseSelect::Case2)?;
    let c3 = run_case(&scenario, &pre, CaseSelect::Case3)?;
    let none = zero_output_schedule(&scenario, &pre);

    let j1 = c1.schedule.j_total;
    let rows = vec![
        CompareRow {
            case: "case1".into(),
            e_loss_tot_kwh: c1.schedule.e_loss_tot_kwh,
            j_total: j1,
            reduction_vs_case1_pct: None,
        },
        CompareRow {
            case: "case2".into(),
            e_loss_tot_kwh: c2.schedule.e_loss_tot_kwh,
            j_total: c2.schedule.j_total,
            reduction_vs_case1_pct: Some(reduction_pct(j1, c2.schedule.j_total)),
        },
        CompareRow {
            case: "case3".into(),
            e_loss_tot_kwh: c3.schedule.e_loss_tot_kwh,
            j_total: c3.schedule.j_total,
            reduction_vs_case1_pct: Some(reduction_pct(j1, c3.schedule.j_total)),
        },
        CompareRow {
            case: "no_esd".into(),
            e_loss_tot_kwh: none.e_loss_tot_kwh,
            j_total: none.j_total,
            reduction_vs_case1_pct: Some(reduction_pct(j1, none.j_total)),
        },
    ];
    write_compare(&rows, &config.out_dir)?;
    // One schedule set is kept for downstream `report`/`validate`.
    write_schedule_csv(&c1.schedule, &scenario, &config.out_dir.join("schedule.csv"))?;
    write_summary(
        &RunSummary::from_schedule(&c1.schedule, &scenario, "case1"),
        &config.out_dir.join("summary.json"),
    )?;
    Ok(())
}

/// `validate`: AC replay of a run directory. Returns the pass flag.
pub fn cmd_validate(scenario_path: &Path, run_dir: &Path, strict: bool) -> Result<bool> {
    let scenario = load_scenario_with(scenario_path, &LoadOptions::default())?;
    let summary = read_summary(&run_dir.join("summary.json"))?;
    let schedule = read_schedule_csv(&run_dir.join("schedule.csv"), &scenario, &summary)?;
    let report = replay(&schedule, &scenario, strict)?;

    #[derive(serde::Serialize)]
    struct ReportOut<'a> {
        pass: bool,
        e_loss_tot_kwh: f64,
        j_realized: f64,
        v_rms_pu: f64,
        max_loss_discrepancy_kw: f64,
        violations: Vec<String>,
        warnings: &'a [String],
        p_loss_ac_kw: &'a [f64],
        p_loss_linear_kw: &'a [f64],
    }
    let out = ReportOut {
        pass: report.pass,
        e_loss_tot_kwh: report.e_loss_tot_kwh,
        j_realized: report.j_realized,
        v_rms_pu: report.v_rms_pu,
        max_loss_discrepancy_kw: report.max_loss_discrepancy_kw,
        violations: report
            .violations
            .iter()
            .map(|v| format!("{} at step {} (index {}): {:.6}", v.constraint, v.step + 1, v.index, v.magnitude))
            .collect(),
        warnings: &report.warnings,
        p_loss_ac_kw: &report.p_loss_ac_kw,
        p_loss_linear_kw: &report.p_loss_linear_kw,
    };
    std::fs::write(
        run_dir.join("report.json"),
        serde_json::to_string_pretty(&out)? + "\n",
    )?;
    Ok(report.pass)
}

/// `report`: renders the four run plots as standalone SVG files.
pub fn cmd_report(scenario_path: &Path, run_dir: &Path) -> Result<()> {
    let scenario = load_scenario_with(scenario_path, &LoadOptions::default())?;
    let summary = read_summary(&run_dir.join("summary.json"))?;
    let schedule = read_schedule_csv(&run_dir.join("schedule.csv"), &scenario, &summary)?;
    let n_k = scenario.n_k;

    let station_ids: Vec<u32> = scenario.stations.stations.iter().map(|s| s.id).collect();
    let positions: Vec<(String, Vec<Option<u32>>)> = schedule
        .per_mesd
        .iter()
        .enumerate()
        .map(|(s, ms)| {
            let series = ms
                .position
                .iter()
                .map(|p| p.station().map(|i| scenario.stations.stations[i].id))
                .collect();
            (format!("mesd{s}"), series)
        })
        .collect();
    std::fs::write(
        run_dir.join("positions.svg"),
        position_chart("Connected stations", n_k, &station_ids, &positions),
    )?;

    let mut power = Vec::new();
    for (s, ms) in schedule.per_mesd.iter().enumerate() {
        power.push(Series { label: format!("P mesd{s} [kW]"), values: ms.p_kw.clone() });
        power.push(Series { label: format!("Q mesd{s} [kvar]"), values: ms.q_kvar.clone() });
    }
    std::fs::write(
        run_dir.join("power.svg"),
        step_chart("Power outputs", "kW / kvar", n_k, &power),
    )?;

    let soc: Vec<Series> = schedule
        .per_mesd
        .iter()
        .enumerate()
        .map(|(s, ms)| Series { label: format!("mesd{s}"), values: ms.soc.clone() })
        .collect();
    std::fs::write(run_dir.join("soc.svg"), step_chart("State of charge", "fraction", n_k, &soc))?;

    let loss = vec![Series {
        label: "ΔP_loss [kW]".to_string(),
        values: summary.per_step.dp_loss_kw.clone(),
    }];
    std::fs::write(
        run_dir.join("loss.svg"),
        step_chart("Incremental network loss", "kW", n_k, &loss),
    )?;
    Ok(())
}

fn dump_transit(scenario: &Scenario, pre: &Precomputed, dir: &Path) -> Result<()> {
    let mut csv = String::from("k,from_station,to_station,gamma,dist_km,nodes\n");
    for k in 0..scenario.n_k {
        for i in 0..scenario.n_i() {
            for j in 0..scenario.n_i() {
                if i == j {
                    continue;
                }
                let e = pre.paths.entry(k, i, j);
                let nodes: Vec<String> = e.nodes.iter().map(|n| n.to_string()).collect();
                csv.push_str(&format!(
                    "{},{},{},{},{:.6},{}\n",
                    k + 1,
                    scenario.stations.stations[i].id,
                    scenario.stations.stations[j].id,
                    e.gamma,
                    e.dist_km,
                    nodes.join("-"),
                ));
            }
        }
    }
    std::fs::write(dir.join("path_table.csv"), csv)?;

    let mut csv = String::from("row,col,value\n");
    for (r, row) in pre.tm.rows.iter().enumerate() {
        for &(c, v) in row {
            csv.push_str(&format!("{r},{c},{v}\n"));
        }
    }
    std::fs::write(dir.join("transit_matrix.csv"), csv)?;
    Ok(())
}

fn dump_sensitivities(pre: &Precomputed, dir: &Path) -> Result<()> {
    let mut csv = String::from("k,matrix,row,col,value\n");
    for (k, step) in pre.bundle.steps.iter().enumerate() {
        for (c, &v) in step.s_ploss.iter().enumerate() {
            if v != 0.0 {
                csv.push_str(&format!("{},ploss,0,{c},{v}\n", k + 1));
            }
        }
        for (r, row) in step.s_v.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    csv.push_str(&format!("{},v,{r},{c},{v}\n", k + 1));
                }
            }
        }
        for (r, row) in step.s_l.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    csv.push_str(&format!("{},l,{r},{c},{v}\n", k + 1));
                }
            }
        }
    }
    std::fs::write(dir.join("sensitivities.csv"), csv)?;
    Ok(())
}

/// Maps a pipeline outcome to the documented process exit code.
pub fn exit_code_for(status: Result<SolveStatus>) -> u8 {
    match status {
        Ok(SolveStatus::Optimal) => 0,
        Ok(SolveStatus::GapLimit | SolveStatus::NodeLimit | SolveStatus::TimeLimit) => 2,
        Ok(SolveStatus::Infeasible | SolveStatus::Unbounded) => 1,
        Err(_) => 1,
    }
}

/// Loads a config's scenario with all overrides applied (used by tests).
pub fn load_for_tests(config: &RunConfig) -> Result<Scenario> {
    config.load()
}
