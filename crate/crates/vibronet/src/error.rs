use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// A directed cycle where an acyclic graph was required. Node ids are 0-based.
    #[error("graph contains a directed cycle through nodes {0:?}")]
    Cyclic(Vec<usize>),

    #[error("not structurally stabilizable: unidirected residual has cycle {cycle:?}")]
    NotStabilizable { cycle: Vec<usize> },

    #[error("cannot design vibration for entry ({row},{col}): {reason}")]
    Design {
        row: usize,
        col: usize,
        reason: String,
    },

    #[error("controlled entries form a directed cycle {cycle:?}; closed-form averaging is undefined")]
    CyclicControlledSet { cycle: Vec<usize> },

    #[error("integration blew up to non-finite values at s = {at}")]
    IntegrationBlowup { at: f64 },

    #[error("step {dt} under-resolves the fastest scaled frequency (need dt <= {max_dt})")]
    UnderResolvedStep { dt: f64, max_dt: f64 },

    #[error("matrix is not Hurwitz (spectral abscissa {abscissa})")]
    NotHurwitz { abscissa: f64 },

    #[error("iteration failed to converge after {iterations} steps (last change {last_change:e})")]
    NonConvergence {
        iterations: usize,
        last_change: f64,
    },

    #[error("no decaying epsilon found in the scanned grid")]
    ThresholdNotFound,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
