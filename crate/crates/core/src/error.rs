use thiserror::Error;

/// Errors raised anywhere in the pipeline. The CLI maps each variant onto an
/// exit code (`Usage`/`Validation`/`Precondition`/`Unsupported` → 2,
/// everything else → 3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unsupported branch: {0}")]
    Unsupported(String),
    #[error("numerical blowup at diamond (u={u}, v={v}): |phi| = {value:e}")]
    Blowup { u: f64, v: f64, value: f64 },
    #[error("internal: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// Short machine-readable tag used in the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Usage(_) => "usage",
            Error::Validation(_) => "validation",
            Error::Precondition(_) => "precondition",
            Error::Unsupported(_) => "unsupported",
            Error::Blowup { .. } => "blowup",
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_)
            | Error::Validation(_)
            | Error::Precondition(_)
            | Error::Unsupported(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::Io(_) => 2,
            Error::Blowup { .. } | Error::Internal(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
