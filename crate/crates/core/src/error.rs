use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid point ({birth}, {death}): {reason}")]
    InvalidPoint {
        birth: f64,
        death: f64,
        reason: &'static str,
    },
    #[error("invalid mass {0}: masses must be finite and positive")]
    InvalidMass(f64),
    #[error("invalid exponent {0}: p must be at least 1")]
    InvalidExponent(f64),
    #[error("bottleneck distance is only defined for diagrams (integer masses), got mass {0}")]
    NonIntegerMass(f64),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("barycenters require p > 1, got {0}")]
    BarycenterExponent(f64),
    #[error("exact barycenter instance too large: {groupings} groupings exceed the limit of {limit}; use frechet_mean instead")]
    TooLarge { groupings: f64, limit: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
