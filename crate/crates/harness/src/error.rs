use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] efleet_core::Error),

    #[error("the trip pool is empty")]
    EmptyPool,

    #[error("garage `{garage}` has {available} trips, {requested} requested")]
    SizeExceedsPool { garage: String, requested: usize, available: usize },

    #[error("GTFS feed is missing `{0}`")]
    MissingTable(PathBuf),

    #[error("GTFS table `{table}` lacks column `{column}`")]
    MissingColumn { table: String, column: String },

    #[error("unknown scenario lever {lever} for {family}")]
    UnknownLever { family: String, lever: usize },

    #[error("invalid matrix configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed run record file: {0}")]
    MalformedRecords(String),

    #[error("plot rendering failed: {0}")]
    Plot(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
