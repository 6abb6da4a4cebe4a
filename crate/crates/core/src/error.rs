use thiserror::Error;

/// Unified error type for the whole crate.
#[derive(Debug, Clone, Error)]
pub enum BifError {
    #[error("syntax error at offset {pos}: expected {expected}")]
    Syntax { pos: usize, expected: String },
    #[error("exponent at offset {pos} is not a nonnegative integer")]
    NonIntegerExponent { pos: usize },
    #[error("unknown identifier `{name}` at offset {pos}")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("evaluation hit an exact pole (division by zero)")]
    EvaluationPole,
    #[error("expression is not rational in z with lambda-polynomial coefficients: {0}")]
    NotRationalInZ(String),

    #[error("root finder did not converge within the iteration cap")]
    NoConvergence,
    #[error("non-finite potential value at a stencil point")]
    NonFinitePotential,

    #[error("family lift is degenerate on more than half of the parameter grid")]
    DegenerateEverywhere,
    #[error("parameter lambda = {0} is degenerate (resultant below threshold)")]
    DegenerateParameter(num_complex::Complex64),

    #[error("multiplier of the continued cycle degenerates (1 - df^p ~ 0)")]
    MultiplierDegeneration,
    #[error("Newton step diverged during cycle continuation")]
    PathNewtonFailure,
    #[error("Newton iteration for the Misiurewicz system diverged")]
    NewtonDivergence,
    #[error("landing cycle is not repelling (|rho| = {0} <= 1)")]
    AttractingLanding(f64),
    #[error("transversality below certification threshold (|t| = {0})")]
    TangentIntersection(f64),
    #[error("cycle is not repelling")]
    NotRepelling,
    #[error("point lies outside the certified linearization domain")]
    OutsideLinearizationDomain,

    #[error("measure vector has zero total mass")]
    ZeroMassVector,

    #[error("I/O error: {0}")]
    Io(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl From<std::io::Error> for BifError {
    fn from(e: std::io::Error) -> Self {
        BifError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, BifError>;
