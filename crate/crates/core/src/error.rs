use thiserror::Error;

/// Errors raised by the coupling model, fitting and sweep layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Hermite order above the supported cap.
    #[error("unsupported Hermite order {order} (maximum {max})")]
    UnsupportedOrder { order: u32, max: u32 },

    /// A parameter is outside its valid domain.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A quantity that must be nonzero or positive is not.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative method stopped before reaching its tolerance.
    /// `best` carries the last estimate and `rel_error` its error estimate.
    #[error("accuracy error: {message} (best estimate {best:e}, relative error {rel_error:e})")]
    Accuracy { message: String, best: f64, rel_error: f64 },

    /// No peak can be distinguished from the noise floor.
    #[error("fit degenerate: {0}")]
    FitDegenerate(String),

    /// Data does not constrain the fit parameters.
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    /// Malformed sweep request.
    #[error("invalid request: {0}")]
    Request(String),
}

pub type Result<T> = std::result::Result<T, Error>;
