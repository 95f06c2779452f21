use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file. `location` is a line/column or row description.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// A value violates a documented invariant. `field` names the offending field.
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },

    #[error("count ledger is missing combination `{0}`")]
    MissingCombination(String),

    #[error("linear program is infeasible: {0}")]
    Infeasible(String),

    /// The analysis cannot produce a meaningful bound (e.g. empty interval).
    #[error("analysis failed: {0}")]
    Analysis(String),
}

impl Error {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input rather than by the analysis.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Parse { .. } | Error::Invalid { .. } | Error::MissingCombination(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
