use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mean event time does not exist: {0}")]
    MomentNonexistent(String),

    #[error("constraint inapplicable: {family} has no {constraint} form")]
    ConstraintInapplicable { family: String, constraint: String },

    #[error("parameter vector has length {got}, model expects {expected}")]
    ParameterLength { expected: usize, got: usize },

    #[error("quadrature did not converge (estimated error {error_estimate:e})")]
    Quadrature { value: f64, error_estimate: f64 },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
