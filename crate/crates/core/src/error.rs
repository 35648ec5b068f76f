use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Variants fall into three families that the command-line front end maps
/// onto distinct exit codes: input/data problems, numerical failures, and
/// I/O or serialization problems (treated as data problems).
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, sizes or parameter ranges that do not agree.
    #[error("invalid input: {0}")]
    Input(String),

    /// A problem located in a specific file, optionally at a specific line.
    #[error("{}: {message}", location(.path, .line))]
    Data {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    /// NaN/infinite values, failed self-checks, or degenerate statistics.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// Training stopped on a non-finite or inconsistent value; the records
    /// completed so far are attached.
    #[error("training aborted: {reason}")]
    TrainingAborted {
        reason: String,
        trace: Box<crate::trainer::TrainTrace>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn location(path: &std::path::Path, line: &Option<usize>) -> String {
    match line {
        Some(l) => format!("{}:{}", path.display(), l),
        None => path.display().to_string(),
    }
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn data(
        path: impl Into<PathBuf>,
        line: Option<usize>,
        msg: impl Into<String>,
    ) -> Self {
        Error::Data {
            path: path.into(),
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for numerical failures (as opposed to bad input or I/O).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_) | Error::TrainingAborted { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
