//! Library half of the `mesdopt` binary: each subcommand is a plain function
//! so tests can drive the full pipeline without spawning processes.

pub mod artifacts;
pub mod commands;
pub mod svg;

pub use commands::{
    cmd_compare, cmd_export, cmd_report, cmd_solve, cmd_validate, CaseSelect, RunConfig,
};
