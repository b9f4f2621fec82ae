use thiserror::Error;

/// Errors raised by the toolkit. Verification failures are reported as data
/// (see the various `*Report` types), never through this enum.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A requested scale lies below the discretization floor of the space.
    #[error("resolution: {0}")]
    Resolution(String),

    /// A cube has too few qualifying children to host the requested exponent.
    #[error(
        "capacity: cube (level {level}, index {index}) has {found} qualifying children, needs {needed}"
    )]
    Capacity {
        level: usize,
        index: usize,
        found: usize,
        needed: usize,
    },

    #[error("budget exceeded: {what} would need {needed} items (cap {cap})")]
    Budget {
        what: &'static str,
        needed: usize,
        cap: usize,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A required hypothesis does not hold; `detail` carries a JSON report
    /// explaining which part failed.
    #[error("precondition failed: {message}")]
    Precondition {
        message: String,
        detail: Option<serde_json::Value>,
    },

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("malformed input: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable tag, used in CLI error payloads.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Argument(_) => "argument",
            Error::Resolution(_) => "resolution",
            Error::Capacity { .. } => "capacity",
            Error::Budget { .. } => "budget",
            Error::Degenerate(_) => "degenerate",
            Error::Precondition { .. } => "precondition",
            Error::Internal(_) => "internal",
            Error::Format(_) => "format",
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        // serde_json's message already ends with "at line L column C"
        Error::Format(e.to_string())
    }
}
