use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{name} must be finite and strictly positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must be finite and non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("{name} = {value} lies outside [0, 1]")]
    OutOfUnitInterval { name: &'static str, value: f64 },
    #[error("{0}")]
    Invalid(String),
}
