//! File formats, the threaded block executor, trace verification and the
//! command-line front end for [`proxjacobi_core`].
//!
//! * [`json`]: problem, network, solution and oracle documents.
//! * [`trace`]: the per-iteration CSV trace.
//! * [`config`]: tuner configuration files.
//! * [`pool`]: a rayon-backed [`BlockExecutor`](proxjacobi_core::jacobi::BlockExecutor)
//!   and a wall clock.
//! * [`check`]: post-hoc verification of a recorded trace.
//! * [`cli`]: the `proxjacobi` command.

pub mod check;
pub mod cli;
pub mod config;
pub mod json;
pub mod pool;
pub mod trace;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("trace format: {0}")]
    Trace(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] proxjacobi_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &std::path::Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
