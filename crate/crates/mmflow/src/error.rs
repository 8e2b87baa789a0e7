use thiserror::Error;

/// Error variants shared by all modules.
#[derive(Debug, Error)]
pub enum Error {
    /// Input could not be parsed (JSON syntax, missing fields, wrong tag).
    #[error("malformed input: {0}")]
    Malformed(String),

    /// A structural validation rule failed (mass, positivity, dimensions).
    #[error("{0}")]
    Invalid(String),

    /// Dimensions of two operands disagree.
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    /// Operation only defined for some dimensions.
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    /// Transport instance exceeds the desk-scale limit.
    #[error("instance too large: {rows} x {cols} exceeds {limit} entries")]
    InstanceTooLarge {
        rows: usize,
        cols: usize,
        limit: usize,
    },

    /// e^{-u} is not integrable: 0 is not interior to the hull of active sites.
    #[error("recession check failed: {0}")]
    Recession(String),

    /// Numerical integration did not reach its certified accuracy.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    /// An iterative solver stopped before reaching its tolerance.
    #[error("solver failed: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code category: 1 for input/validation problems, 2 for
    /// solver/numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Malformed(_)
            | Error::Invalid(_)
            | Error::DimensionMismatch(_, _)
            | Error::UnsupportedDimension(_)
            | Error::InstanceTooLarge { .. }
            | Error::Io(_) => 1,
            Error::Recession(_) | Error::Quadrature(_) | Error::Solver(_) => 2,
        }
    }
}
