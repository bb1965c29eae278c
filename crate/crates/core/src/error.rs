use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("corpus contains no stories")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("remote provider unreachable: {0}")]
    RemoteUnreachable(String),
    #[error("remote protocol error: {0}")]
    RemoteProtocol(String),
    #[error("provider returned an empty distribution")]
    EmptyDistribution,
    #[error("no candidates to score")]
    EmptyCandidates,
    #[error("design matrix of arm {arm} is not positive definite")]
    SingularMatrix { arm: usize },
    #[error("episode step {step} has no payoff for beam size {beam_size}")]
    MissingArmPayoff { step: usize, beam_size: usize },
    #[error("twist position {position} outside support 2..={n_max}")]
    Support { position: u32, n_max: u32 },
    #[error("twist probabilities sum to {sum}, more than 1e-6 away from 1")]
    NormalizationGap { sum: f64 },
    #[error("inconsistent story length: expected {expected}, found {found} at line {line}")]
    InconsistentLength {
        expected: u32,
        found: u32,
        line: usize,
    },
    #[error("label file contains no labels")]
    EmptyLabels,
    #[error("prompt contains no tokens")]
    EmptyPrompt,
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by bad input data rather than the runtime
    /// environment or a remote backend.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self,
            Error::RemoteUnreachable(_) | Error::RemoteProtocol(_) | Error::SingularMatrix { .. }
        )
    }
}
