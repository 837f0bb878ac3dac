//! Process exit codes.

use std::fmt;

use surfwave::Error;

pub const OK: u8 = 0;
/// A check or suite reported failure.
pub const FAILED: u8 = 1;
pub const CONFIG: u8 = 2;
/// Physics precondition, e.g. no usable dispersion root.
pub const PHYSICS: u8 = 3;
/// Input artifact inconsistent with the configuration.
pub const ARTIFACT: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self { code, error: error.into() }
    }

    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Self::new(CONFIG, error)
    }

    pub fn physics(error: impl Into<anyhow::Error>) -> Self {
        Self::new(PHYSICS, error)
    }

    pub fn artifact(error: impl Into<anyhow::Error>) -> Self {
        Self::new(ARTIFACT, error)
    }

    pub fn other(error: impl Into<anyhow::Error>) -> Self {
        Self::new(FAILED, error)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

/// Maps library errors onto exit codes.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) => CONFIG,
            Error::Domain(_) | Error::DegeneratePrefactor { .. } => PHYSICS,
            Error::GridMismatch(_) | Error::Format(_) | Error::NotHermitian { .. } => ARTIFACT,
            _ => FAILED,
        };
        Self::new(code, e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::other(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::other(e)
    }
}
