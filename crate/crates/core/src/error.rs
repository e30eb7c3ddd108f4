use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// `|(n+1) L_n^0(eta^2)|` fell below the configured guard.
    #[error("singular denominator in f({n}): |(n+1)L_n^0(eta^2)| = {denominator:e}")]
    SingularDenominator { n: usize, denominator: f64 },

    #[error("nonlinearity table has {len} entries but f({n}) was requested")]
    TableExhausted { n: usize, len: usize },

    /// A coefficient or operator needs `1/f(n)` at a zero of `f`.
    #[error("f({n}) = 0, inverse nonlinearity undefined")]
    ZeroNonlinearity { n: usize },

    #[error("expansion not converged by n = {n_max} (relative tail {tail:e})")]
    Divergence { n_max: usize, tail: f64 },

    #[error("state mass {mass:e} in the top quarter of a dim = {dim} basis; raise dim")]
    TailOverflow { dim: usize, mass: f64 },

    #[error("g2(0) undefined: mean occupation is zero")]
    UndefinedG2,

    #[error("{path}: {message}")]
    Table { path: PathBuf, message: String },
}

impl Error {
    /// Fock level that triggered the error, when there is one.
    pub fn offending_n(&self) -> Option<usize> {
        match self {
            Error::SingularDenominator { n, .. }
            | Error::TableExhausted { n, .. }
            | Error::ZeroNonlinearity { n } => Some(*n),
            Error::Divergence { n_max, .. } => Some(*n_max),
            _ => None,
        }
    }
}
