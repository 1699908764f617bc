use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the evaluation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A value violated a type invariant at construction time.
    #[error("invalid {what}: {reason}")]
    Invariant { what: &'static str, reason: String },

    /// A line of an input stream could not be parsed.
    #[error("{source_name}line {line}: {message}")]
    Parse {
        /// File name prefix (`"path: "`) or empty for anonymous streams.
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Environment configuration problems (bad JSON, duplicate labels, ...).
    #[error("config: {0}")]
    Config(String),

    /// A measure is undefined for the given inputs.
    #[error("{0}")]
    Undefined(String),

    /// Inputs to a comparison are incompatible (different measures, topics, systems).
    #[error("incompatible inputs: {0}")]
    Mismatch(String),

    #[error("simulation: {0}")]
    Simulation(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invariant(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invariant {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: String::new(),
            line,
            message: message.into(),
        }
    }

    /// Attaches a file name to a parse error; other errors pass through.
    pub fn in_file(self, path: &std::path::Path) -> Self {
        match self {
            Error::Parse {
                source_name,
                line,
                message,
            } if source_name.is_empty() => Error::Parse {
                source_name: format!("{}: ", path.display()),
                line,
                message,
            },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
