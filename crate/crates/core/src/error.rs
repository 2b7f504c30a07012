//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("no interactions found in {0}")]
    EmptyLog(String),

    #[error("segment with {0} event(s) cannot be split into train and test")]
    DegenerateSplit(usize),

    #[error("embedding size {size} outside [{d_min}, {d_max}]")]
    SizeOutOfBounds {
        size: usize,
        d_min: usize,
        d_max: usize,
    },

    #[error("allocation plan covers {got} rows, table has {expected}")]
    PlanShape { expected: usize, got: usize },

    #[error("budget {budget} cannot fit {entities} entities at minimum size {d_min}")]
    InfeasibleBudget {
        budget: u64,
        entities: usize,
        d_min: usize,
    },

    #[error("infeasible budget at segment {segment}: {source}")]
    SegmentBudget {
        segment: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("table needs at least one user and one item row")]
    EmptyTable,

    #[error("row {0} out of range")]
    RowOutOfRange(usize),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("bad configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Stable machine-readable tag for CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::EmptyLog(_) => "empty_log",
            Error::DegenerateSplit(_) => "degenerate_split",
            Error::SizeOutOfBounds { .. } => "size_out_of_bounds",
            Error::PlanShape { .. } => "plan_shape",
            Error::InfeasibleBudget { .. } => "infeasible_budget",
            Error::SegmentBudget { .. } => "segment_budget",
            Error::EmptyTable => "empty_table",
            Error::RowOutOfRange(_) => "row_out_of_range",
            Error::Format(_) => "format",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
        }
    }
}
