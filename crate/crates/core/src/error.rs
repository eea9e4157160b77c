use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// One malformed input row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for RowError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: field `{}`: {}", self.line, self.field, self.message)
    }
}

fn join_rows(rows: &[RowError]) -> String {
    rows.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{} malformed row(s): {}", .0.len(), join_rows(.0))]
    MalformedRows(Vec<RowError>),

    #[error("unknown classification scheme `{0}`")]
    UnknownScheme(String),

    #[error("invalid {scheme} code `{code}`")]
    InvalidCode { scheme: String, code: String },

    #[error("no records for period {0}")]
    EmptyPeriod(i32),

    #[error("scheme mismatch: expected {expected}, found {found}")]
    SchemeMismatch { expected: String, found: String },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("zero-degree {axis}(s) present: {}", .ids.join(", "))]
    ZeroDegree { axis: &'static str, ids: Vec<String> },

    #[error("empty intersection: {0}")]
    EmptyIntersection(String),

    #[error("did not converge after {iterations} iterations (residual {residual:e}): {what}")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unrecognised input schema in {path}: {detail}")]
    UnknownSchema { path: PathBuf, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numerical non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::NonConvergence { .. } | Error::Numerical(_) => 4,
            _ => 3,
        }
    }

    /// Short machine-readable kind tag used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::MalformedRows(_) => "malformed_rows",
            Error::UnknownScheme(_) => "unknown_scheme",
            Error::InvalidCode { .. } => "invalid_code",
            Error::EmptyPeriod(_) => "empty_period",
            Error::SchemeMismatch { .. } => "scheme_mismatch",
            Error::Data(_) => "data",
            Error::ZeroDegree { .. } => "zero_degree",
            Error::EmptyIntersection(_) => "empty_intersection",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Numerical(_) => "numerical",
            Error::UnknownSchema { .. } => "unknown_schema",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
