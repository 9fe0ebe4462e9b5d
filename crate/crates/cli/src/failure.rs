//! Error classes and their process exit codes.

use std::fmt;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Bad flags or flag values: exit 1.
    Usage,
    /// Unreadable or invalid input files: exit 2.
    Data,
    /// A computation that did not produce a usable result: exit 3.
    Numerical,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self.kind {
            Kind::Usage => 1,
            Kind::Data => 2,
            Kind::Numerical => 3,
        })
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

/// Tags any error with a failure class.
pub trait Classify<T> {
    fn or_fail(self, kind: Kind) -> CmdResult<T>;
    fn usage(self) -> CmdResult<T>;
    fn data(self) -> CmdResult<T>;
    fn numerical(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_fail(self, kind: Kind) -> CmdResult<T> {
        self.map_err(|e| Failure { kind, error: e.into() })
    }
    fn usage(self) -> CmdResult<T> {
        self.or_fail(Kind::Usage)
    }
    fn data(self) -> CmdResult<T> {
        self.or_fail(Kind::Data)
    }
    fn numerical(self) -> CmdResult<T> {
        self.or_fail(Kind::Numerical)
    }
}

pub fn fail<T>(kind: Kind, message: impl fmt::Display) -> CmdResult<T> {
    Err(Failure {
        kind,
        error: anyhow::anyhow!("{message}"),
    })
}
