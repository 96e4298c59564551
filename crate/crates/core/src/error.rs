use thiserror::Error;

use crate::na::ExtRational;

/// Errors produced by the library. Budget exhaustion and certified-bound
/// violations are reported through statuses and reports, not through this type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("evaluation at t = 0 of a coefficient with a pole")]
    ZeroParameter,
    #[error("division by the zero Laurent polynomial")]
    ZeroDivision,
    #[error("degenerate family: {0}")]
    DegenerateFamily(String),
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("parameter out of range: {0}")]
    ParameterTooLarge(String),
    #[error("floating-point overflow after {steps} iterations")]
    Overflow { steps: usize },
    #[error("insufficient precision: {0}")]
    InsufficientPrecision(String),
    #[error("tropical tie between terms {terms:?} at value {value}")]
    TropicalTie { terms: Vec<usize>, value: ExtRational },
    #[error("invalid escape radius: {0}")]
    InvalidRadius(String),
    #[error("symbolic budget exceeded: degree {degree} > {budget}")]
    BudgetExceeded { degree: u64, budget: u64 },
    #[error("homogeneous datum structure violated: {0}")]
    StructureViolation(String),
    #[error("non-finite value in Green field at node {0}")]
    NonFiniteField(usize),
    #[error("orbit escaped the bailout radius at step {step}")]
    OrbitEscaped { step: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
