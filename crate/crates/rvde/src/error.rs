//! Crate-wide error type.

use std::fmt;

/// Everything that can go wrong across validation, geometry, solving,
/// fitting, and I/O.
#[derive(Debug)]
pub enum Error {
    /// A dataset with zero rows was supplied where points are required.
    EmptyDataset,
    /// A vector or point had the wrong number of coordinates.
    DimensionError { expected: usize, got: usize },
    /// Two rows of a point set are bitwise identical.
    DuplicatePoints { first: usize, second: usize },
    /// A direction vector was zero or not unit length.
    DegenerateDirection,
    /// An argument fell outside a kernel's domain of definition.
    DomainError { detail: String },
    /// A requested integral diverges (e.g. a rational tail with k <= n).
    NotIntegrable { detail: String },
    /// The kernel cannot be used for radial Voronoi estimation.
    KernelNotAdmissible { detail: String },
    /// An iterative solver stopped without meeting its tolerance.
    ConvergenceError { best: f64, residual: f64 },
    /// Numerical quadrature could not reach the requested tolerance.
    IntegrationError { achieved: f64 },
    /// A parameter failed validation (non-positive bandwidth, bad grid, ...).
    ParameterError { detail: String },
    /// The operation needs at least two distinct points.
    NeedsTwoPoints,
    /// An adaptive pilot density underflowed to zero at the given row.
    PilotUnderflow { point: usize },
    /// A data file could not be parsed; `row` is 1-based.
    ParseError { row: usize, detail: String },
    /// A config document violated the schema; `pointer` is a JSON pointer.
    ConfigError { pointer: String, detail: String },
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyDataset => write!(f, "dataset has no rows"),
            Error::DimensionError { expected, got } => {
                write!(f, "expected {expected} coordinates, got {got}")
            }
            Error::DuplicatePoints { first, second } => {
                write!(f, "rows {first} and {second} are identical points")
            }
            Error::DegenerateDirection => write!(f, "direction is zero or not unit length"),
            Error::DomainError { detail } => write!(f, "domain error: {detail}"),
            Error::NotIntegrable { detail } => write!(f, "integral diverges: {detail}"),
            Error::KernelNotAdmissible { detail } => {
                write!(f, "kernel not admissible: {detail}")
            }
            Error::ConvergenceError { best, residual } => write!(
                f,
                "solver failed to converge (best {best:e}, residual {residual:e})"
            ),
            Error::IntegrationError { achieved } => {
                write!(f, "quadrature tolerance not met (achieved {achieved:e})")
            }
            Error::ParameterError { detail } => write!(f, "invalid parameter: {detail}"),
            Error::NeedsTwoPoints => write!(f, "need at least two points"),
            Error::PilotUnderflow { point } => {
                write!(f, "pilot density underflowed to zero at point {point}")
            }
            Error::ParseError { row, detail } => write!(f, "parse error at row {row}: {detail}"),
            Error::ConfigError { pointer, detail } => {
                write!(f, "config error at {pointer}: {detail}")
            }
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
