use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |A(i,j) - conj(A(j,i))| = {max_asymmetry:.3e} exceeds tolerance {tolerance:.1e}")]
    NotHermitian { max_asymmetry: f64, tolerance: f64 },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("invalid quantum state: {reason}")]
    InvalidState { reason: String },

    #[error("invalid measurement design: {reason}")]
    InvalidDesign { reason: String },

    #[error("invalid channel: {reason}")]
    InvalidChannel { reason: String },

    #[error("outcome invalid for design: {context}")]
    InvalidOutcome { context: String },

    #[error("negative outcome probability {value:.3e} beyond tolerance; state is not physical")]
    NegativeProbability { value: f64 },

    #[error("outcome space of {outcomes} elements exceeds the enumeration limit {limit}")]
    EnumerationTooLarge { outcomes: u128, limit: u64 },

    #[error("projection did not converge in {iterations} iterations (min eigenvalue {min_eigenvalue:.3e}, marginal deviation {marginal_deviation:.3e})")]
    ProjectionDidNotConverge {
        iterations: usize,
        min_eigenvalue: f64,
        marginal_deviation: f64,
    },

    #[error("invalid bound parameters: {reason}")]
    InvalidBoundParams { reason: String },

    #[error("config error [{field}]: {message}")]
    Config { field: String, message: String },

    #[error("no trial records to export")]
    EmptyRecords,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
