use core::fmt;

/// Errors raised by mechanisms, calculators and sessions.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violated its precondition.
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    /// The session's query budget is spent; further queries are refused.
    BudgetExhausted { used: usize, limit: usize },
    /// A query returned a value outside its declared range.
    QueryOutOfRange { value: f64 },
    /// A gradient descent run stopped part way because the oracle refused a query.
    DescentAborted { completed_iterations: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Self {
        Error::InvalidParameter { name, reason }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter `{name}`: {reason}")
            }
            Error::BudgetExhausted { used, limit } => {
                write!(f, "query budget exhausted ({used} of {limit} used)")
            }
            Error::QueryOutOfRange { value } => {
                write!(f, "query value {value} outside its declared range")
            }
            Error::DescentAborted {
                completed_iterations,
            } => write!(
                f,
                "gradient descent aborted after {completed_iterations} iterations: budget exhausted"
            ),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

/// Non-fatal configuration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// The dataset is smaller than the sample-size guidance for the requested accuracy.
    SampleSizeBelowGuidance { n: usize, recommended: f64 },
    /// Strongly convex descent wants `alpha' * sqrt(d) <= 1/T`; the oracle is coarser than that.
    OracleTooCoarse { alpha_prime_sqrt_d: f64, limit: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::SampleSizeBelowGuidance { n, recommended } => write!(
                f,
                "n = {n} is below the sample-size guidance n >= {recommended:.1}"
            ),
            Warning::OracleTooCoarse {
                alpha_prime_sqrt_d,
                limit,
            } => write!(
                f,
                "gradient oracle accuracy alpha'*sqrt(d) = {alpha_prime_sqrt_d:.4} exceeds 1/T = {limit:.4}"
            ),
        }
    }
}

/// A value together with the warnings raised while building it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checked<T> {
    pub value: T,
    pub warnings: alloc::vec::Vec<Warning>,
}

impl<T> Checked<T> {
    pub fn has_warnings(&self) -> bool {
        !self.warnings.is_empty()
    }

    pub fn into_inner(self) -> T {
        self.value
    }
}
