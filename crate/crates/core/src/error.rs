use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("arm {arm} has no observed outcomes at timepoint {timepoint}")]
    EmptyArm { arm: u8, timepoint: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("design matrix is rank deficient")]
    SingularDesign,

    #[error("observation {index} has leverage {leverage} (must be < 1)")]
    Leverage { index: usize, leverage: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("contrast has {got} coefficients, model has {expected}")]
    ContrastShape { expected: usize, got: usize },

    #[error(
        "inference is degenerate (theta = {theta_hat}, se = {std_error}); report the raw estimate only"
    )]
    DegenerateInference { theta_hat: f64, std_error: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error at row {row}, column '{column}': {message}")]
    Input {
        row: usize,
        column: String,
        message: String,
    },

    #[error("{0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by bad input or configuration rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Config(_) | Error::Input { .. } | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
