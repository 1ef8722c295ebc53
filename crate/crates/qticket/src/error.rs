use std::io;

use qticket_core::bounds::BoundsError;
use qticket_core::construct::ConstructError;
use qticket_core::qnn::QnnError;
use qticket_core::solver::SolverError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const CAPACITY: i32 = 3;
    pub const CONSTRUCTION_FAILED: i32 = 4;
    pub const MISMATCH: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver capacity exceeded: {0}")]
    Capacity(SolverError),
    #[error("construction failed: {0}")]
    ConstructionFailed(String),
    #[error("verification mismatch: {0}")]
    Mismatch(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: unsupported schema {found}, expected {expected}")]
    Schema { path: String, found: u32, expected: u32 },
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json { .. } | Error::Schema { .. } => exit::CONFIG,
            Error::Capacity(_) => exit::CAPACITY,
            Error::ConstructionFailed(_) => exit::CONSTRUCTION_FAILED,
            Error::Mismatch(_) => exit::MISMATCH,
            Error::Io { .. } => exit::IO,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

impl From<SolverError> for Error {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InstanceTooLarge { .. } => Error::Capacity(e),
            other => Error::Config(other.to_string()),
        }
    }
}

impl From<ConstructError> for Error {
    fn from(e: ConstructError) -> Self {
        match e {
            ConstructError::Solver(s) => s.into(),
            other => Error::Config(other.to_string()),
        }
    }
}

impl From<QnnError> for Error {
    fn from(e: QnnError) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<BoundsError> for Error {
    fn from(e: BoundsError) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
