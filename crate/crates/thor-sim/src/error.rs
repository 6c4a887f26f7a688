use std::fmt;

/// Errors surfaced by the simulator, attacker, and harness.
#[derive(Debug, Clone, PartialEq)]
pub enum ThorError {
    /// A configuration value is malformed, out of range, or inconsistent.
    Config(String),
    /// A calibration procedure could not converge or bracket its target.
    Calibration(String),
    /// A function was called with an argument outside its domain.
    Argument(String),
    /// An I/O problem while reading or writing config/report files.
    Io(String),
}

impl fmt::Display for ThorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThorError::Config(m) => write!(f, "config error: {m}"),
            ThorError::Calibration(m) => write!(f, "calibration failure: {m}"),
            ThorError::Argument(m) => write!(f, "invalid argument: {m}"),
            ThorError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for ThorError {}

pub type Result<T> = std::result::Result<T, ThorError>;
