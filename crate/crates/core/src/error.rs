//! Crate-wide error type. Module-specific enums are wrapped here so the CLI
//! can classify failures into usage / data-validation / numerical exit codes.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] crate::ingest::IngestError),
    #[error(transparent)]
    Markov(#[from] crate::markov::MarkovError),
    #[error(transparent)]
    Mixed(#[from] crate::mixed::MixedError),
    #[error(transparent)]
    Sos(#[from] crate::sos::SosError),
    #[error(transparent)]
    Attribution(#[from] crate::attribution::AttributionError),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Ingest(_) => ErrorCategory::Data,
            Error::Markov(e) => e.category(),
            Error::Mixed(e) => e.category(),
            Error::Sos(_) => ErrorCategory::Data,
            Error::Attribution(_) => ErrorCategory::Data,
            Error::Synth(_) => ErrorCategory::Usage,
            Error::Io { .. } => ErrorCategory::Io,
            Error::Json(_) | Error::Csv(_) => ErrorCategory::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
