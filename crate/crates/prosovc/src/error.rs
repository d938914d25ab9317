use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors from file formats and the pipeline. Every variant that touches the
/// filesystem names the path.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {msg}", path.display())]
    Wav { path: PathBuf, msg: String },

    #[error("{}: multi-channel audio ({channels} channels)", path.display())]
    MultiChannel { path: PathBuf, channels: u16 },

    #[error("{}: unsupported encoding: {msg}", path.display())]
    UnsupportedEncoding { path: PathBuf, msg: String },

    #[error("missing cache entry {kind} for {id:?} ({})", path.display())]
    MissingKey { id: String, kind: &'static str, path: PathBuf },

    #[error("stale cache entry {}: stored config hash {stored:016x}, current {current:016x}", path.display())]
    StaleCache { path: PathBuf, stored: u64, current: u64 },

    #[error("{}: corrupt file: {msg}", path.display())]
    Corrupt { path: PathBuf, msg: String },

    #[error("{}: config mismatch: {msg}", path.display())]
    ConfigMismatch { path: PathBuf, msg: String },

    #[error("{}: {msg}", path.display())]
    Config { path: PathBuf, msg: String },

    #[error("missing {what}: {}", path.display())]
    Missing { what: &'static str, path: PathBuf },

    #[error("{}: {source}", path.display())]
    Core { path: PathBuf, source: prosovc_core::Error },

    #[error(transparent)]
    Compute(#[from] prosovc_core::Error),

    #[error("{failed} of {total} utterances failed")]
    Partial { failed: usize, total: usize },

    #[error("threshold violated: {0}")]
    Threshold(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().to_path_buf(), source }
    }

    pub fn corrupt(path: impl AsRef<Path>, msg: impl Into<String>) -> Self {
        Error::Corrupt { path: path.as_ref().to_path_buf(), msg: msg.into() }
    }

    /// Process exit code: 2 for data problems, 3 for failed thresholds.
    /// Usage errors (1) are raised by the argument parser before any work.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Threshold(_) => 3,
            _ => 2,
        }
    }
}

/// Attaches a path to a computation error.
pub(crate) trait WithPath<T> {
    fn at(self, path: &Path) -> Result<T>;
}

impl<T> WithPath<T> for std::result::Result<T, prosovc_core::Error> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|source| Error::Core { path: path.to_path_buf(), source })
    }
}
