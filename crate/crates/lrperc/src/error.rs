//! Crate-wide error type.
//!
//! Variants are grouped by how the CLI maps them to exit codes: validation
//! (bad inputs or violated preconditions), size (exact enumeration too
//! large), bracketing (bisection could not bracket the target), and
//! internal consistency (a runtime check of the exploration failed).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),

    #[error("zero displacement has no kernel value")]
    ZeroDisplacement,

    #[error("dimension mismatch: expected d={expected}, got d={got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("kernels do not differ anywhere (empty difference set)")]
    EmptyDelta,

    #[error("perturbed kernel exceeds the base kernel at displacement {0}")]
    OrderViolation(String),

    #[error("difference of kernels has no finite support witness (tails stay above 1e-15)")]
    InfiniteDifference,

    #[error("kernel attains 1 outside the difference set; survival product is zero")]
    ZeroProduct,

    #[error("window budget exhausted before reaching requested accuracy (tail bound {tail:.3e})")]
    WindowBudget { tail: f64 },

    #[error("enumeration too large: {atoms:.3e} atoms exceeds the {limit:.1e} limit")]
    Size { atoms: f64, limit: f64 },

    #[error("bracketing failed: {0}")]
    Bracketing(String),

    #[error("decay fit needs at least 3 usable points, got {usable}")]
    Fit { usable: usize },

    #[error("internal consistency failure at stage {stage}: {message}")]
    InternalConsistency {
        stage: u64,
        message: String,
        trace: Vec<crate::exploration::TraceRecord>,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code class used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::ZeroDisplacement
            | Error::DimensionMismatch { .. }
            | Error::EmptyDelta
            | Error::OrderViolation(_)
            | Error::InfiniteDifference
            | Error::ZeroProduct
            | Error::Fit { .. }
            | Error::Config(_) => 2,
            Error::Size { .. } => 3,
            Error::Bracketing(_) => 4,
            Error::InternalConsistency { .. } => 5,
            Error::WindowBudget { .. } => 6,
            Error::Io(_) => 7,
        }
    }
}
