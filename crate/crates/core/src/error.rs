//! Crate-wide error type.

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

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),

    #[error("orphan tree paths (parent prefix owned by no term): {}", .0.join(", "))]
    OrphanTreePaths(Vec<String>),

    #[error("tree path {path:?} belongs to both term {first:?} and term {second:?}")]
    AmbiguousTreePath {
        path: String,
        first: String,
        second: String,
    },

    #[error("term {term_id:?} declared with conflicting names {first:?} and {second:?}")]
    ConflictingTermName {
        term_id: String,
        first: String,
        second: String,
    },

    #[error("validation failed in strict mode:\n{0}")]
    StrictValidation(String),

    #[error("invalid {what}: {why}")]
    InvalidParameter { what: &'static str, why: String },

    #[error("network {0:?} has no nodes")]
    EmptyNetwork(String),

    #[error("id {0:?} is both a document id and an external work id")]
    NodeIdCollision(String),

    #[error("invalid network edge: {0}")]
    InvalidEdge(String),

    #[error("partition does not cover the network: {0}")]
    InvalidPartition(String),

    #[error("empty solution: no cluster survived cleaning")]
    EmptySolution,

    #[error("topic has no documents in the solution")]
    TopicDocsAbsent,

    #[error("topic {term_id:?} [{branch}] has no documents in the solution")]
    TopicAbsent { term_id: String, branch: String },

    #[error("no records for analysis cell {0}")]
    EmptyCell(String),

    #[error("rankings disagree on the branch set: {0}")]
    InconsistentBranchSets(String),

    #[error("nothing to export: the record table is empty")]
    NothingToExport,

    #[error("config error: {0}")]
    Config(String),

    #[error("work directory is locked (lock file {0} exists)")]
    WorkDirLocked(PathBuf),

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),

    #[error("missing artifact {path}: run `{stage}` first")]
    MissingArtifact { path: PathBuf, stage: &'static str },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(file: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Coarse error category used for the CLI's one-line failure output.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::EmptyNetwork(_) => "data",
            Error::DuplicateDocId(_)
            | Error::OrphanTreePaths(_)
            | Error::AmbiguousTreePath { .. }
            | Error::ConflictingTermName { .. }
            | Error::NodeIdCollision(_)
            | Error::InvalidEdge(_)
            | Error::InvalidPartition(_)
            | Error::EmptySolution
            | Error::TopicDocsAbsent
            | Error::TopicAbsent { .. }
            | Error::EmptyCell(_)
            | Error::InconsistentBranchSets(_)
            | Error::NothingToExport => "data",
            Error::StrictValidation(_) => "validation",
            Error::InvalidParameter { .. } | Error::Config(_) | Error::InfeasibleSpec(_) => {
                "config"
            }
            Error::WorkDirLocked(_) | Error::MissingArtifact { .. } => "state",
        }
    }
}
