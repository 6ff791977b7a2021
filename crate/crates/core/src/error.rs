use thiserror::Error;

/// Errors produced by the library and surfaced by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of the requested operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A computation produced a non-finite value.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The moment target cannot be reached by the mean map of the model.
    #[error("no solution: target {target:?} is outside the attainable range ({range})")]
    NoSolution { target: Vec<f64>, range: String },

    /// The mean-map inversion hit its iteration cap.
    #[error("solver did not converge after {iterations} iterations (residual {residual:e}, last iterate {last:?})")]
    Convergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 domain/config, 3 solver, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Numeric(_)
            | Error::Config(_)
            | Error::Schema(_)
            | Error::Aggregation(_) => 2,
            Error::NoSolution { .. } | Error::Convergence { .. } => 3,
            Error::Io(_) | Error::Csv(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
