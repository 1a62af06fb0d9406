use thiserror::Error;

/// Errors raised across the reachability engine and the navigation loop.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate extent on axis {axis}: lower {lower} >= upper {upper}")]
    DegenerateExtent { axis: usize, lower: f64, upper: f64 },

    #[error("axis {axis} has {count} nodes, at least 3 are required")]
    TooFewNodes { axis: usize, count: usize },

    #[error("state {value} on axis {axis} lies outside [{lower}, {upper}]")]
    OutOfBounds {
        axis: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{kind} channel {channel} = {value} outside [{lower}, {upper}]")]
    InputOutOfBounds {
        kind: &'static str,
        channel: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("pseudo-time step {0:e} underflows; check dissipation bounds and grid spacing")]
    CflUnderflow(f64),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("local update queue still holds {remaining} nodes after {iterations} iterations; delta tolerance too small")]
    QueueDidNotDrain { iterations: usize, remaining: usize },

    #[error("scenario configuration: {0}")]
    Scenario(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
