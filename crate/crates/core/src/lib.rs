//! Mixed-fleet (battery-electric and diesel) bus scheduling with partial,
//! capacity-constrained charging.
//!
//! The crate offers an exact time-indexed MILP ([`exact`]), a column-generation
//! heuristic ([`colgen`]) and an independent feasibility checker with a
//! brute-force optimizer for tiny instances ([`validator`]).

pub mod colgen;
pub mod compat;
pub mod error;
pub mod exact;
pub mod finance;
pub mod instance;
pub mod mp;
pub mod solution;
pub mod validator;

pub use compat::{CompatibilityIndex, TimeGrid};
pub use error::{Error, Result};
pub use instance::{Instance, Network, OpParams, Point, Station, Trip, VehicleType};
pub use solution::{Solution, Run, Visit};
