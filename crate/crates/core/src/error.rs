use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("duplicate trip id `{0}`")]
    DuplicateTrip(String),

    #[error("trip `{id}` lies outside the planning horizon [0, {horizon}]")]
    TripOutsideHorizon { id: String, horizon: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid financial input: {0}")]
    InvalidFinance(String),

    #[error("malformed model: {0}")]
    MalformedModel(String),

    #[error("solver backend `{0}` is not available")]
    BackendUnavailable(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("model is infeasible: {0}")]
    Infeasible(String),

    #[error("trip `{0}` has no feasible singleton schedule of either vehicle type")]
    NoSingleton(String),

    #[error("restricted master problem cannot cover trip `{0}`")]
    UncoveredTrip(String),

    #[error("column generation failed at iteration {iteration}: {source}")]
    ColumnGeneration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("brute force supports at most {max} trips, instance has {actual}")]
    TooManyTrips { max: usize, actual: usize },

    #[error("malformed solution: {0}")]
    MalformedSolution(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
