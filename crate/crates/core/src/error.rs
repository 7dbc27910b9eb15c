use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate polarization state: {0}")]
    DegenerateState(String),

    #[error("undefined phase: {0}")]
    UndefinedPhase(String),

    #[error("impossible condition: {0}")]
    ImpossibleCondition(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("fit underdetermined: {0}")]
    Underdetermined(String),

    #[error("fit did not converge after {iterations} iterations (residual sum of squares {rss:.6e}): {detail}")]
    NonConvergence {
        iterations: usize,
        rss: f64,
        detail: String,
    },

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("missing required field `{0}`")]
    MissingField(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("row {row}: {message}")]
    Table { row: u64, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::DegenerateState(_) => "degenerate_state",
            Error::UndefinedPhase(_) => "undefined_phase",
            Error::ImpossibleCondition(_) => "impossible_condition",
            Error::DivisionByZero(_) => "division_by_zero",
            Error::InsufficientStatistics(_) => "insufficient_statistics",
            Error::DegenerateData(_) => "degenerate_data",
            Error::Underdetermined(_) => "underdetermined",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Config { .. } => "config",
            Error::MissingField(_) => "missing_field",
            Error::Parse { .. } => "parse",
            Error::Table { .. } => "table",
            Error::Io { .. } => "io",
        }
    }

    /// Process exit status for the command-line tool. Usage errors use 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::MissingField(_) | Error::Parse { .. } => 3,
            Error::Io { .. } | Error::Table { .. } => 4,
            Error::NonConvergence { .. } | Error::Underdetermined(_) | Error::DegenerateData(_) => {
                5
            }
            _ => 1,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
