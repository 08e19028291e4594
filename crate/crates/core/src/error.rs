use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("input shape error: {0}")]
    Shape(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("classification failed: {0}")]
    ClassificationFailed(String),
    #[error("recovery failed: {0}")]
    RecoveryFailed(String),
    #[error("ordering failed: {0}")]
    OrderingFailed(String),
    #[error("bijection failed: {0}")]
    BijectionFailed(String),
    #[error("indeterminate unresolved: {0}")]
    IndeterminateUnresolved(String),
    #[error("work limit exceeded: {0}")]
    WorkLimit(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Pipeline stage a failure belongs to, used in reports and exit codes.
    pub fn stage(&self) -> &'static str {
        match self {
            Error::ClassificationFailed(_) => "classify",
            Error::RecoveryFailed(_) => "recover_equation",
            Error::OrderingFailed(_) => "ordering",
            Error::BijectionFailed(_) | Error::IndeterminateUnresolved(_) => "interleaver",
            Error::WorkLimit(_) => "graph_recon",
            _ => "input",
        }
    }
}
