//! Day-ahead co-optimization of mobile energy storage devices (MESDs) in a
//! distribution grid.
//!
//! An MESD is a truck-mounted battery that can park at charging stations and
//! inject or absorb power. This crate schedules both the charge/discharge
//! power and the road-network routes of a fleet over a 24-hour horizon so
//! that the combined cost of grid energy losses and transit energy is
//! minimized. The problem is assembled as a mixed-integer linear program
//! from:
//!
//! * a linear transit model built from time-dependent fastest paths
//!   ([`transit`]),
//! * linearized grid-sensitivity constraints around a forecast operating
//!   point ([`grid`]),
//! * battery power/power-factor/state-of-charge constraints ([`scheduler`]).
//!
//! The MILP is solved by the embedded branch-and-bound solver in [`milp`]
//! (or exported in LP format for an external solver), and solutions are
//! independently re-verified by [`validator`] with full AC power flows and a
//! journey state machine.

pub mod error;
pub mod grid;
pub mod milp;
pub mod scenario;
pub mod scheduler;
pub mod transit;
pub mod validator;

pub use error::CoreError;
pub use grid::{GridNetwork, PowerFlowSolution, SensitivityBundle};
pub use milp::{MilpModel, MilpSolution, SolveStatus};
pub use scenario::{Limits, MesdSpec, Scenario, SolverOptions, StationMap};
pub use scheduler::Schedule;
pub use transit::{PathTable, RoadNetwork, TransitMatrix, TravelTimeTable};
pub use validator::ValidationReport;

/// Uniform result alias used across the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
