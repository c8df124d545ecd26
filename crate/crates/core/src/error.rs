use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A radius or point outside the region where the quantity is defined.
    Domain { what: &'static str, value: f64 },
    /// Family or numerical parameters violating their constraints.
    InvalidParameter(String),
    DivisionByZero,
    /// Finite-difference stencil would leave the punctured unit ball.
    StepTooLarge { step: f64, radius: f64 },
    /// Nested quadrature rules disagree by more than the requested tolerance.
    QuadratureFailure { estimate: f64, tolerance: f64 },
    SingularMatrix,
    /// Requested quadrature needs more points than the budget allows; carries
    /// the value from the largest rule that fit.
    BudgetExceeded { partial: f64, needed: usize, budget: usize },
    /// The radial solve picked up the singular `r^{-n}` branch.
    BranchContamination { exponent: f64 },
    /// A regression had too few usable points or degenerate columns.
    FitDegenerate(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::DivisionByZero => f.write_str("division by zero (profile value vanishes)"),
            Error::StepTooLarge { step, radius } => {
                write!(f, "finite-difference step {step} too large at radius {radius}")
            }
            Error::QuadratureFailure { estimate, tolerance } => write!(
                f,
                "quadrature error estimate {estimate:e} exceeds tolerance {tolerance:e}"
            ),
            Error::SingularMatrix => f.write_str("matrix is singular"),
            Error::BudgetExceeded { partial, needed, budget } => write!(
                f,
                "quadrature needs {needed} points, budget is {budget} (partial result {partial})"
            ),
            Error::BranchContamination { exponent } => write!(
                f,
                "radial solution follows the singular branch (local exponent {exponent})"
            ),
            Error::FitDegenerate(what) => write!(f, "degenerate fit: {what}"),
        }
    }
}

impl core::error::Error for Error {}
