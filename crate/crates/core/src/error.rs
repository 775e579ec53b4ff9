//! Error types shared by every module.

use alloc::string::String;
use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes of the numerical kernel.
///
/// Poles are reported as structured errors naming the vanishing factor,
/// never as infinite values, so that callers (residue computations, route
/// selection) can tell which factor is responsible.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// An argument lies outside the admissible domain.
    Domain(String),
    /// A series or quadrature failed to converge.
    Convergence(String),
    /// Evaluation hit a (simple) pole; the message names the vanishing factor.
    Pole(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn convergence(msg: impl Into<String>) -> Self {
        Error::Convergence(msg.into())
    }

    pub fn pole(factor: impl Into<String>) -> Self {
        Error::Pole(factor.into())
    }

    pub fn is_pole(&self) -> bool {
        matches!(self, Error::Pole(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Convergence(m) => write!(f, "convergence error: {m}"),
            Error::Pole(m) => write!(f, "pole: vanishing factor {m}"),
        }
    }
}

#[cfg(test)]
impl std::error::Error for Error {}
