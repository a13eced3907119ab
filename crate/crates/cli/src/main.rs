use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mesdopt_cli::commands::{exit_code_for, CaseSelect, RunConfig};
use mesdopt_cli::{cmd_compare, cmd_export, cmd_report, cmd_solve, cmd_validate};

/// Day-ahead co-optimization of mobile energy storage routing and dispatch.
#[derive(Parser)]
#[command(name = "mesdopt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SolveArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Strategy: 1 = co-optimized, 2 = stationary two-stage, 3 = fixed-path.
    #[arg(long, default_value_t = 1)]
    case: u8,
    /// Output directory for run artifacts.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Relative MIP gap override.
    #[arg(long)]
    gap: Option<f64>,
    /// Wall-time limit in seconds.
    #[arg(long = "time-limit")]
    time_limit: Option<f64>,
    /// Re-sample every profile onto this many steps.
    #[arg(long = "nk-override")]
    nk_override: Option<usize>,
    /// Pin a unit's start station, as `<mesd>:<station-id>` (repeatable).
    #[arg(long = "pin-start")]
    pin_start: Vec<String>,
    /// Write model.lp and stop before solving.
    #[arg(long = "export-only", default_value_t = false)]
    export_only: bool,
    /// Dump the fastest-path table and transit matrix as CSV.
    #[arg(long = "dump-transit", default_value_t = false)]
    dump_transit: bool,
    /// Dump the per-step sensitivity matrices as CSV.
    #[arg(long = "dump-sensitivities", default_value_t = false)]
    dump_sensitivities: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one strategy and write schedule.csv / summary.json.
    Solve(SolveArgs),
    /// Solve all strategies plus the no-fleet baseline and tabulate them.
    Compare(SolveArgs),
    /// Re-verify a run directory with full AC power flows.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        /// Run directory holding schedule.csv and summary.json.
        #[arg(long, default_value = "run")]
        run: PathBuf,
        /// Turn linearization-discrepancy warnings into failures.
        #[arg(long, default_value_t = false)]
        strict: bool,
    },
    /// Render SVG plots from a run directory.
    Report {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "run")]
        run: PathBuf,
    },
    /// Write the MILP in LP format without solving.
    Export(SolveArgs),
}

fn parse_case(case: u8) -> Result<CaseSelect, String> {
    match case {
        1 => Ok(CaseSelect::Case1),
        2 => Ok(CaseSelect::Case2),
        3 => Ok(CaseSelect::Case3),
        other => Err(format!("--case must be 1, 2 or 3 (got {other})")),
    }
}

fn parse_pins(args: &[String]) -> Result<Vec<(usize, u32)>, String> {
    args.iter()
        .map(|spec| {
            let (s, id) = spec
                .split_once(':')
                .ok_or_else(|| format!("--pin-start expects <mesd>:<station-id>, got `{spec}`"))?;
            Ok((
                s.parse().map_err(|_| format!("bad MESD index `{s}`"))?,
                id.parse().map_err(|_| format!("bad station id `{id}`"))?,
            ))
        })
        .collect()
}

fn build_config(args: &SolveArgs) -> Result<RunConfig, String> {
    let mut config = RunConfig::new(&args.scenario, parse_case(args.case)?, &args.out);
    config.gap = args.gap;
    config.time_limit_s = args.time_limit;
    config.nk_override = args.nk_override;
    config.pin_start = parse_pins(&args.pin_start)?;
    config.export_only = args.export_only;
    config.dump_transit = args.dump_transit;
    config.dump_sensitivities = args.dump_sensitivities;
    config.threads = std::env::var("MESDOPT_THREADS")
        .ok()
        .and_then(|v| v.parse().ok());
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Solve(args) => match build_config(args) {
            Ok(config) => {
                let status = cmd_solve(&config);
                if let Err(e) = &status {
                    eprintln!("error: {e}");
                }
                exit_code_for(status)
            }
            Err(msg) => {
                eprintln!("error: {msg}");
                1
            }
        },
        Command::Compare(args) => match build_config(args) {
            Ok(config) => match cmd_compare(&config) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            },
            Err(msg) => {
                eprintln!("error: {msg}");
                1
            }
        },
        Command::Validate { scenario, run, strict } => match cmd_validate(scenario, run, *strict) {
            Ok(true) => 0,
            Ok(false) => 1,
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Command::Report { scenario, run } => match cmd_report(scenario, run) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Command::Export(args) => match build_config(args) {
            Ok(config) => match cmd_export(&config) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            },
            Err(msg) => {
                eprintln!("error: {msg}");
                1
            }
        },
    };
    ExitCode::from(code)
}
