use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Missing columns, unreadable headers, empty files.
    #[error("schema error: {0}")]
    Schema(String),

    /// Bad values in an otherwise well-formed input. `row` is 1-based and
    /// counts data rows (the header is row 0).
    #[error("data error at row {row}: {message}")]
    Data { row: usize, message: String },

    #[error("size error: {0}")]
    Size(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Zero-variance sample where moments are required.
    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("observation {index} has zero density under the model (x = {value})")]
    ZeroDensity { index: usize, value: f64 },

    #[error("component {component} collapsed: {message}")]
    ComponentCollapse { component: usize, message: String },

    #[error("empty cluster after {attempts} initialization attempts")]
    EmptyCluster { attempts: usize },

    #[error("log-likelihood decreased at iteration {iteration}: {previous} -> {current}")]
    AscentViolation {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    /// Every start of a multi-start fit failed.
    #[error("fit failed for all {} starts: {}", .0.len(), .0.join("; "))]
    FitFailure(Vec<String>),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
