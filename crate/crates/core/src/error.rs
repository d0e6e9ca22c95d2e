//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by threshold computations, solvers, and experiments.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative scheme ran out of iterations before reaching tolerance.
    #[error("failed to converge: {0}")]
    NoConvergence(String),

    /// The theta equation has no sign change on the scan grid and the
    /// theta = 1 certificate is invalid, so no recovery threshold can be
    /// certified for these parameters.
    #[error("no root of the {kind} theta equation for beta={beta}, d={d}, epsilon={epsilon}")]
    NoRoot {
        kind: crate::threshold::ThresholdKind,
        beta: f64,
        d: u32,
        epsilon: f64,
    },

    /// A factorization failed because the matrix is (numerically) rank
    /// deficient.
    #[error("rank-deficient matrix: {0}")]
    RankDeficient(String),

    /// The null-space dimension exceeds what the grid oracle can sweep.
    #[error("null-space dimension {dim} exceeds oracle limit {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    /// A weak-threshold check was requested without block directions.
    #[error("support pattern is missing block directions for the weak check")]
    MissingDirections,

    /// Two signals (or a matrix and a vector) have incompatible shapes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The failure fractions for a measurement column never straddle 50%,
    /// so no empirical crossing can be interpolated.
    #[error("failure fractions for m={m} do not bracket 50%")]
    NoBracket { m: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that signal a mathematical impossibility rather than
    /// bad usage; the CLI maps these to a dedicated exit code.
    pub fn is_mathematical(&self) -> bool {
        matches!(
            self,
            Error::NoRoot { .. }
                | Error::DimensionTooLarge { .. }
                | Error::NoConvergence(_)
                | Error::RankDeficient(_)
                | Error::NoBracket { .. }
        )
    }
}
