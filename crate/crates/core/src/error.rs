use thiserror::Error;

use crate::eigen::EigenResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("mesh mismatch: potential has dimension {pot_dim} order {pot_n}, box has dimension {box_dim} order {box_n}")]
    MeshMismatch {
        pot_dim: usize,
        pot_n: usize,
        box_dim: usize,
        box_n: usize,
    },

    #[error("matrix order {order} exceeds the configured maximum {max}")]
    SizeOverflow { order: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dense solver limited to order {max}, got {order}")]
    DenseThreshold { order: usize, max: usize },

    #[error("eigensolver did not converge in {} matvecs (worst residual {:.3e})", .0.iterations, .0.max_residual())]
    NoConvergence(Box<EigenResult>),

    #[error("dense QL iteration failed to converge")]
    DenseNoConvergence,

    #[error("inertia computation failed at shift {shift}: pivot breakdown persisted after guard retries")]
    FactorizationBreakdown { shift: f64 },

    #[error("ground state is not strictly positive (min entry {min_entry:.3e})")]
    NotPositive { min_entry: f64 },

    #[error("potential is not reflection symmetric (max deviation {deviation:.3e} > {tol:.3e})")]
    NotSymmetric { deviation: f64, tol: f64 },

    #[error("degenerate edges: E-(a) = {e_a}, E-(b) = {e_b}")]
    Degenerate { e_a: f64, e_b: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("realization {index} failed: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
