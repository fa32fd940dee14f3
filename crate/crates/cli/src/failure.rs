use std::fmt;

use spreadwave_core::calibration::FitError;
use spreadwave_core::Error;

/// Exit codes: 0 success, 2 I/O, 3 invalid input or config, 4 numerical failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Io = 2,
    Invalid = 3,
    Numerical = 4,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: ExitKind,
    pub message: String,
}

impl Failure {
    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Io,
            message: message.into(),
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Invalid,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Numerical,
            message: message.into(),
        }
    }

    /// Prefixes the message, e.g. with the file being read.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::Io(_) => ExitKind::Io,
            Error::Csv(c) if c.is_io_error() => ExitKind::Io,
            Error::NonConvergence { .. } => ExitKind::Numerical,
            _ => ExitKind::Invalid,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<FitError> for Failure {
    fn from(e: FitError) -> Self {
        Error::from(e).into()
    }
}
