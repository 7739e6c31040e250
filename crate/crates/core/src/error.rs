use thiserror::Error;

/// Errors produced anywhere in the fitting stack.
///
/// Every variant maps onto one of the CLI exit classes through
/// [`Error::exit_code`]: usage (2), numerical (3) or schema (4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("residual undefined: denominator {denominator:e} is not positive")]
    Domain { denominator: f64 },

    #[error("singular fit: {0}")]
    SingularFit(String),

    #[error("camera matrix of point {index} is rank deficient")]
    RankDeficientCamera { index: usize },

    #[error("minimax bisection could not bracket the optimum (upper level reached {alpha_hi:e})")]
    Unbounded { alpha_hi: f64 },

    #[error("degenerate draw: {0}")]
    Degenerate(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Domain { .. }
            | Error::SingularFit(_)
            | Error::Unbounded { .. }
            | Error::Degenerate(_)
            | Error::Consistency(_) => 3,
            Error::RankDeficientCamera { .. } | Error::Schema(_) | Error::Io(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
