use thiserror::Error;

use crate::report::IterationReport;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("decomposition error: {0}")]
    Decomposition(String),
    #[error("subdomain {subdomain} solve did not converge after {} Newton iterations", report.outer)]
    Subdomain {
        subdomain: usize,
        report: IterationReport,
    },
    #[error("linear solver failed: {0}")]
    LinearSolver(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
