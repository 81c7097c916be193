use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Input violates a documented precondition or invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A panel or series is unusable for the requested computation.
    #[error("data error: {0}")]
    Data(String),

    /// The optimizer failed to produce a usable solution.
    #[error("solver error: {0}")]
    Solver(String),

    /// A statistic is undefined on the given input.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Coarse classification used by the CLI to pick an exit code.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Validation(_) | Error::Data(_) | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
