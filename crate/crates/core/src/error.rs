use std::path::PathBuf;

use crate::base_learner::{InterchangeError, LearnerError};
use crate::features::FeatureError;
use crate::ingest::{FetchError, IngestError, XmlError};
use crate::labeling::HeadingMapError;
use crate::metrics::MetricError;
use crate::stacker::StackError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error, one variant per module error plus I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error(transparent)]
    HeadingMap(#[from] HeadingMapError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Interchange(#[from] InterchangeError),
    #[error(transparent)]
    Stack(#[from] StackError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
