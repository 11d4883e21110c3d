use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs whose shapes do not line up.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A precondition on values (not shapes) was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("robot {robot} has no state available for task evaluation")]
    MissingState { robot: usize },

    #[error("allocation problem is infeasible: {0}")]
    Infeasible(String),

    #[error("enumeration refused: search space of {size} candidates exceeds limit {limit}")]
    SearchSpaceTooLarge { size: f64, limit: f64 },

    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
