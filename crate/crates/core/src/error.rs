//! Error type shared by all modules.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DmiError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Not enough samples for a full-rank sample covariance.
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    /// The constant-modulus descent did not settle within the sweep budget.
    #[error("separator did not converge after {sweeps} sweeps (final cost {cost:.3e})")]
    ConvergenceFailure { sweeps: usize, cost: f64 },

    /// Denoised signal power came out non-positive; the branch carries no
    /// usable evidence and must be discarded by the caller.
    #[error("degenerate branch: non-positive signal power estimate {mu21:.3e}")]
    DegenerateBranch { mu21: f64 },

    /// Every branch of a trial was discarded before fusion.
    #[error("no decision: empty decision list")]
    NoDecision,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv: {0}")]
    MalformedCsv(String),
}

pub type Result<T> = std::result::Result<T, DmiError>;
