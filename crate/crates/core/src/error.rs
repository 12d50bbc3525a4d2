use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A solver ran out of iterations. `trace` holds the last recorded
    /// objective (or update size) values, newest last.
    #[error("{solver} did not converge after {iterations} iterations (last values: {trace:?})")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        trace: Vec<f64>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid data: {0}")]
    Data(String),

    /// A fitted stage asked for information it must not see (test labels).
    #[error("leakage guard: {0}")]
    Leakage(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => 1,
            Error::Convergence { .. } | Error::Numerical(_) => 3,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
