use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("insufficient accidentals: every bin outside the coincidence window is empty")]
    InsufficientAccidentals,

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("no resonance found: dip depth {depth:.3e} is below 3x the noise floor {noise:.3e}")]
    NoResonance { depth: f64, noise: f64 },

    #[error("fit did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter { name, reason: format!("must be finite, got {v}") })
    }
}

pub(crate) fn check_non_negative(name: &'static str, v: f64) -> Result<f64> {
    check_finite(name, v)?;
    if v < 0.0 {
        return Err(Error::InvalidParameter { name, reason: format!("must be non-negative, got {v}") });
    }
    Ok(v)
}

pub(crate) fn check_positive(name: &'static str, v: f64) -> Result<f64> {
    check_finite(name, v)?;
    if v <= 0.0 {
        return Err(Error::InvalidParameter { name, reason: format!("must be positive, got {v}") });
    }
    Ok(v)
}

pub(crate) fn check_fraction(name: &'static str, v: f64, open_low: bool) -> Result<f64> {
    check_finite(name, v)?;
    let ok = if open_low { v > 0.0 && v <= 1.0 } else { (0.0..=1.0).contains(&v) };
    if !ok {
        let range = if open_low { "(0, 1]" } else { "[0, 1]" };
        return Err(Error::InvalidParameter { name, reason: format!("must lie in {range}, got {v}") });
    }
    Ok(v)
}
