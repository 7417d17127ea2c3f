use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum ColdError {
    #[error("system size mismatch: expected {expected} sites, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("Pauli word supports at most {max} sites, got {got}")]
    WordTooLong { got: usize, max: usize },

    #[error("dense materialization cap exceeded: {n_sites} sites > cap {cap}")]
    DenseCapExceeded { n_sites: usize, cap: usize },

    #[error("lambda {lambda} outside [{lo}, {hi}]")]
    LambdaOutOfRange { lambda: f64, lo: f64, hi: f64 },

    #[error("expected {expected} pulses for {expected} control groups, got {got}")]
    PulseCountMismatch { expected: usize, got: usize },

    #[error("operator is not Hermitian within {tol:e} (max imaginary part {max_im:e})")]
    NotHermitian { max_im: f64, tol: f64 },

    #[error("degenerate gap |E_{m} - E_{n}| = {gap:e} below tolerance {tol:e} with coupling {coupling:e}")]
    DegenerateGap {
        m: usize,
        n: usize,
        gap: f64,
        tol: f64,
        coupling: f64,
    },

    #[error("nested commutator expansion exceeded {cap} words at order {order}")]
    CommutatorBlowup { order: usize, cap: usize },

    #[error("state vector has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cost function returned a non-finite value at {location}")]
    NonFiniteCost { location: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid experiment spec: {0}")]
    InvalidExperiment(String),
}

pub type Result<T> = std::result::Result<T, ColdError>;
