use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("basis mismatch: {0} vs {1}")]
    BasisMismatch(String, String),

    #[error("non-finite {what} at t = {}", crate::fmt::sig(*at, 6))]
    NonFinite { what: String, at: f64 },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("variable scope error: {0}")]
    VariableScope(String),

    #[error("parse error in `{input}`: {msg}")]
    Parse { input: String, msg: String },

    #[error("system is not linear: {0}")]
    NotLinear(String),

    #[error("rank deficient: rank {rank} of {size}; {certificate}")]
    RankDeficient {
        rank: usize,
        size: usize,
        certificate: String,
    },

    #[error("singular initial condition: {0}")]
    SingularIc(String),

    #[error("sequential elimination stalled at equation {equation}: {reason}")]
    SequentialStall { equation: usize, reason: String },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Failures of the mathematics itself (as opposed to malformed input).
    pub fn is_mathematical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::SingularIc(_)
                | Error::SequentialStall { .. }
                | Error::NoConvergence { .. }
                | Error::NonFinite { .. }
                | Error::NotLinear(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
