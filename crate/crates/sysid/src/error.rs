use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: time column jumps from {prev} to {found} at line {line}")]
    NonContiguousTime { path: PathBuf, line: usize, prev: i64, found: i64 },
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Core { stage: &'static str, source: sysid_core::Error },
    #[error("solver: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, msg: msg.into() }
    }

    /// Process exit code: 3 for solver trouble, 4 for everything that is
    /// wrong with the inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Solver(_) => 3,
            Error::Core { source, .. } => match source {
                sysid_core::Error::NoConvergence { .. }
                | sysid_core::Error::SingularE { .. }
                | sysid_core::Error::NotPositiveDefinite
                | sysid_core::Error::NotConcave { .. }
                | sysid_core::Error::Singular
                | sysid_core::Error::InconsistentEqualities { .. } => 3,
                _ => 4,
            },
            _ => 4,
        }
    }
}

/// Tags a core error with the pipeline stage it came from.
pub trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> Stage<T> for sysid_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| Error::Core { stage, source })
    }
}
