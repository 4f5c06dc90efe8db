use thiserror::Error;

/// Errors reported by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument was NaN or infinite where a finite value is required.
    #[error("non-finite argument: {0}")]
    NonFinite(String),

    /// phi order outside the supported range.
    #[error("phi order {0} outside supported range 0..=4")]
    PhiOrder(usize),

    /// A multistep scheme was asked to step without enough history records.
    #[error("history holds {got} record(s), scheme needs {need}")]
    InsufficientHistory { need: usize, got: usize },

    /// History records are not on a uniform time grid.
    #[error("history spacing broken at t = {at}: expected step {expected}, got {got}")]
    NonUniformHistory { expected: f64, got: f64, at: f64 },

    /// Invalid argument (step size, horizon, resolution, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A membrane model document failed validation; `field` is the offending path.
    #[error("model document field `{field}`: {message}")]
    ModelSchema { field: String, message: String },

    /// I/O failure while reading an external file.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// The RK4 reference run blew up; the reference step is unusable.
    #[error("reference solution overflowed at step {step} (h_ref = {h_ref})")]
    ReferenceOverflow { h_ref: f64, step: usize },

    /// Two-step reference check failed: the reference is not converged enough
    /// to measure the coarsest scheme error.
    #[error("reference not converged: two-reference disagreement {check:e} exceeds 1% of coarsest error {coarsest:e}")]
    ReferenceNotConverged { check: f64, coarsest: f64 },

    /// The error metric denominator max|v_ref| is zero.
    #[error("error metric undefined: reference potential is identically zero")]
    ZeroReference,

    /// Trajectory and reference grids do not line up.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
