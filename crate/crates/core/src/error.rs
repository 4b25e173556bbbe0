//! Library error type.

use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum SimError {
    /// A time grid was empty, did not start at 0, or was not strictly increasing.
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    /// Two paths that must share a grid were defined on different grids.
    #[error("paths are defined on different grids")]
    GridMismatch,

    /// A parameter violated an operation's precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An aggregation was asked to reduce an empty sample set.
    #[error("empty sample set")]
    EmptySamples,
}

pub type SimResult<T> = Result<T, SimError>;
