use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants carry the names used in reports so the CLI can surface them
/// verbatim (see [`Error::name`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("predicate {predicate} expects {expected} values, got {found}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },

    #[error("unknown predicate {0}")]
    UnknownPredicate(String),

    #[error("duplicate tuple identifier {0}")]
    DuplicateTid(String),

    #[error("unknown tuple identifier {0}")]
    UnknownTid(String),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("head variable {0} does not occur in the rule body")]
    HeadVariableNotInBody(String),

    #[error("query is not Boolean")]
    NonBooleanQuery,

    #[error("query is not true in the database")]
    QueryNotTrue,

    #[error("database does not satisfy the integrity constraints")]
    InconsistentInput,

    #[error("no truth value for variable {0}")]
    UnboundVariable(String),

    #[error("{count} variables exceed the enumeration cap of {cap}")]
    TooManyVariables { count: usize, cap: usize },

    #[error("enumeration exceeded the cap of {cap}")]
    ExplosionGuard { cap: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("answer position {position} holds non-numeric value {value:?}")]
    NonNumericPosition { position: usize, value: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable variant name.
    pub fn name(&self) -> &'static str {
        match self {
            Error::ArityMismatch { .. } => "ArityMismatch",
            Error::UnknownPredicate(_) => "UnknownPredicate",
            Error::DuplicateTid(_) => "DuplicateTid",
            Error::UnknownTid(_) => "UnknownTid",
            Error::InvalidSchema(_) => "InvalidSchema",
            Error::Parse { .. } => "ParseError",
            Error::HeadVariableNotInBody(_) => "HeadVariableNotInBody",
            Error::NonBooleanQuery => "NonBooleanQuery",
            Error::QueryNotTrue => "QueryNotTrue",
            Error::InconsistentInput => "InconsistentInput",
            Error::UnboundVariable(_) => "UnboundVariable",
            Error::TooManyVariables { .. } => "TooManyVariables",
            Error::ExplosionGuard { .. } => "ExplosionGuard",
            Error::InvalidParams(_) => "InvalidParams",
            Error::NonNumericPosition { .. } => "NonNumericPosition",
            Error::Io(_) => "IoError",
            Error::Csv(_) => "CsvError",
            Error::Json(_) => "JsonError",
        }
    }
}
