use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("infeasible placement: {0}")]
    Infeasible(String),

    #[error("zero-energy input: {0}")]
    ZeroEnergy(String),

    #[error("no jammer detected: covariance trace {trace:e} below threshold {threshold:e}")]
    NoJammer { trace: f64, threshold: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing genie input: {0}")]
    MissingGenie(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
