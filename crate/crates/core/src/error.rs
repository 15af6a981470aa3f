use std::path::PathBuf;

use thiserror::Error;

/// Broad failure class, used by front-ends to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Runner,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("orphan task_id {}", .0.join(", "))]
    OrphanTasks(Vec<String>),

    #[error("duplicate {kind} id {id} for task {task_id}")]
    DuplicateId {
        kind: &'static str,
        task_id: String,
        id: String,
    },

    #[error("duplicate task_id {0}")]
    DuplicateTask(String),

    #[error("{0}")]
    Data(String),

    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("matrix for task {task_id}: {message}")]
    Matrix { task_id: String, message: String },

    #[error("consensus sets do not partition the solutions: {0}")]
    InvalidPartition(String),

    #[error("score is not finite for |S|={solutions}, |T|={tests}")]
    NonFiniteScore { solutions: usize, tests: usize },

    #[error("k={k} exceeds n={n}")]
    KExceedsN { k: usize, n: usize },

    #[error("missing tasks: {}", .0.join(", "))]
    MissingTasks(Vec<String>),

    #[error("task {0} has no hidden tests")]
    NoHiddenTests(String),

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),

    #[error("runner: {0}")]
    Runner(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Runner(_) => ErrorClass::Runner,
            Error::Invalid(_) | Error::InfeasibleSpec(_) | Error::KExceedsN { .. } => {
                ErrorClass::Usage
            }
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
