use std::io;

/// Errors raised by the toolkit.
///
/// Every variant maps to a stable class name (see [`Error::class`]) so that
/// command-line front ends can report failures in a machine-parsable way.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("non-finite value: {0}")]
    NonFinite(f64),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("stencil leaves available data: {0}")]
    OutOfCollar(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("missing data: {0}")]
    Coverage(String),
    #[error("CFL number {cfl} exceeds 1")]
    Cfl { cfl: f64 },
    #[error("degenerate reference: {0}")]
    Degenerate(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("empty window: {0}")]
    EmptyWindow(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> &'static str {
        match self {
            Error::Domain(_) => "DomainError",
            Error::Resolution(_) => "ResolutionError",
            Error::NonFinite(_) => "NonFiniteError",
            Error::Quadrature(_) => "QuadratureError",
            Error::Unsupported(_) => "UnsupportedError",
            Error::OutOfCollar(_) => "OutOfCollarError",
            Error::Shape(_) => "ShapeError",
            Error::Coverage(_) => "CoverageError",
            Error::Cfl { .. } => "CFLError",
            Error::Degenerate(_) => "DegenerateError",
            Error::Format(_) => "FormatError",
            Error::EmptyWindow(_) => "EmptyWindowError",
            Error::Config(_) => "ConfigError",
            Error::Io(_) => "IoError",
            Error::Csv(_) => "FormatError",
            Error::Json(_) => "FormatError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
