use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulation and metric pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or names that do not line up (wrong lengths, unknown variables, size mismatches).
    #[error("structural error: {0}")]
    Structural(String),

    /// Values that are well-shaped but not acceptable (NaN, out-of-range parameters).
    #[error("validation error: {0}")]
    Validation(String),

    /// Expression evaluation failed.
    #[error("evaluation error in `{expr}`: {reason}")]
    Eval { expr: String, reason: String },

    /// A process term violated the operational semantics at run time.
    #[error("semantic error: {0}")]
    Semantic(String),

    /// Process text could not be parsed.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A single simulation run failed; the whole estimate is aborted.
    #[error("run {run} failed at step {step}: {source}")]
    RunFailed {
        run: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    /// Rejection sampling ran out of attempts before collecting enough variations.
    #[error("perturbation shortfall: accepted {accepted} of {required} variations in {attempts} attempts")]
    Shortfall {
        accepted: usize,
        required: usize,
        attempts: usize,
    },

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Experiment configuration could not be resolved.
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad input rather than by a failing computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Structural(_)
                | Error::Validation(_)
                | Error::Parse { .. }
                | Error::Config { .. }
                | Error::Precondition(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
