use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("I/O error on {path}: {source}")]
    IoPath {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// Malformed input file; `location` is a human readable position such as
    /// `annotations.conll:12` or `record 3`.
    #[error("format error at {location}: {message}")]
    Format { location: String, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("probability stream misaligned for paper {paper_id} paragraph {paragraph}: {message}")]
    Alignment {
        paper_id: String,
        paragraph: usize,
        message: String,
    },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn format(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn argument(message: impl Into<String>) -> Self {
        Error::Argument(message.into())
    }

    pub(crate) fn io_at(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::IoPath {
            path: path.into(),
            source,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        match err.into_kind() {
            csv::ErrorKind::Io(e) => Error::Io(e),
            other => {
                let location = match &other {
                    csv::ErrorKind::Utf8 { pos: Some(p), .. }
                    | csv::ErrorKind::UnequalLengths { pos: Some(p), .. } => {
                        format!("line {}", p.line())
                    }
                    _ => "csv".to_string(),
                };
                Error::format(location, format!("{other:?}"))
            }
        }
    }
}
