//! Experiment harness: synthetic and GTFS trip pools, instance sampling,
//! scenario levers, run matrices and reports.

pub mod error;
pub mod generate;
pub mod gtfs;
pub mod matrix;
pub mod pool;
pub mod report;
pub mod scenario;

pub use error::{Error, Result};
