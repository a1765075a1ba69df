use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed line {line} in {path}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate visit_id {0:?}")]
    DuplicateVisitId(String),
    #[error("no annotatable text in corpus")]
    NoAnnotatableText,
    #[error("degenerate co-occurrence: no visit has at least two in-vocabulary concepts")]
    DegenerateCooc,
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("unknown concept {0:?}")]
    UnknownConcept(String),
    #[error("vocabulary mismatch: every analogy question was skipped")]
    VocabularyMismatch,
    #[error("k = {k} exceeds number of points n = {n}")]
    TooManyClusters { k: usize, n: usize },
    #[error("clusterings cover different visit sets: {0}")]
    MismatchedIds(String),
    #[error("zero variance: projection undefined")]
    ZeroVariance,
    #[error("optimization diverged: objective is not finite")]
    NonFiniteObjective,
    #[error("missing prerequisite artifact {path} (produced by stage `{stage}`)")]
    MissingArtifact { path: PathBuf, stage: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
