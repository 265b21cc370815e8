use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("size limit exceeded: {what} is {got}, cap is {cap}")]
    SizeLimit {
        what: &'static str,
        got: usize,
        cap: usize,
    },

    #[error("incomplete input: {0}")]
    IncompleteInput(String),

    #[error("quadrature did not reach tolerance {tol:e} (best estimate {value}, error estimate {error:e})")]
    Accuracy { value: f64, error: f64, tol: f64 },

    #[error("unsupported integrand: {0}")]
    UnsupportedIntegrand(String),

    #[error("support condition violated: {0}")]
    SupportCondition(String),

    #[error("contour dimension {0} is beyond the |K'| <= 3 truncation")]
    OutOfTruncation(usize),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("unsupported range: {0}")]
    UnsupportedRange(String),

    #[error("sampler failure: {0}")]
    SamplerFailure(String),

    #[error("estimate invalid: {failures} of {attempts} draws failed")]
    EstimateInvalid { failures: usize, attempts: usize },

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
