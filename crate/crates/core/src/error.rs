use thiserror::Error;

/// Errors raised by the solver, the certificates and the experiment driver.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (non-finite tensor, negative count, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A model, grid or experiment configuration is inconsistent.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// The requested time step exceeds the explicit stability bound.
    #[error("time step {dt:e} exceeds the stability limit; use dt <= {suggested:e}")]
    Stability { dt: f64, suggested: f64 },

    /// Ledger records were supplied out of time order.
    #[error("sequencing error: record at t = {got} follows t = {last}")]
    Sequencing { last: f64, got: f64 },

    /// Input data is missing or misaligned.
    #[error("input error: {0}")]
    Input(String),

    /// The state blew up (NaN or infinity) during stepping.
    #[error("non-finite field at t = {time}")]
    NonFinite { time: f64 },

    /// Malformed configuration or snapshot file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
