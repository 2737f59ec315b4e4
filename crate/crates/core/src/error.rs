use thiserror::Error;

/// Errors raised by the solvers in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate density: quadrature mass {rho:e} is below the floor")]
    DegenerateDensity { rho: f64 },

    #[error("non-positive temperature {temp:e}")]
    NegativeTemperature { temp: f64 },

    #[error("CFL number {cfl:.4} exceeds the limit {limit:.4}")]
    CflViolation { cfl: f64, limit: f64 },

    #[error("recurrence breakdown at order {order}: beta = {beta:e}")]
    RecurrenceBreakdown { order: usize, beta: f64 },

    #[error("generalized eigenvalue census ({pos}, {zero}, {neg}) does not match ({expected}, 1, {expected})")]
    EigenCountMismatch {
        pos: usize,
        zero: usize,
        neg: usize,
        expected: usize,
    },

    #[error("damped operator is not positive definite")]
    IndefiniteDamping,

    #[error("boundary system for the damped layer problem is singular")]
    SingularBoundarySystem,

    #[error("recovery matrix is singular (condition number {condition:e})")]
    SingularRecovery { condition: f64 },

    #[error("Roe average breakdown: squared sound speed {c2:e}")]
    RoeBreakdown { c2: f64 },

    #[error("zero denominator projecting onto outgoing mode (sonic reference state)")]
    ZeroDenominator,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidConfig(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
