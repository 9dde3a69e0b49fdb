use thiserror::Error;

/// Errors raised by the algebra, the solvers and the verification harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QslqError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("filtration index {index} out of range 0..={modes}")]
    FiltrationIndex { index: usize, modes: usize },

    #[error("adaptedness violated at step {step}: mass {mass:.3e} outside H_{step}")]
    NotAdapted { step: usize, mass: f64 },

    #[error(
        "singular gain at node {node}: min eig(K) = {min_eig:.3e} below threshold {threshold:.3e}"
    )]
    SingularGain {
        node: usize,
        min_eig: f64,
        threshold: f64,
    },

    #[error("operator is not Hermitian (defect {defect:.3e}): {what}")]
    NotHermitian { what: String, defect: f64 },

    #[error("operator is not positive semidefinite (min eig {min_eig:.3e}): {what}")]
    NotPositive { what: String, min_eig: f64 },

    #[error("ill-conditioned flow at node {node}: condition number {cond:.3e}")]
    IllConditioned { node: usize, cond: f64 },

    #[error(
        "open-loop problem has no minimizer: linear term has mass {mass:.3e} along flat directions"
    )]
    Unbounded { mass: f64 },

    #[error("dense superoperators for N = {modes} need {bytes} bytes, budget is {budget}")]
    MemoryBudget {
        modes: usize,
        bytes: u128,
        budget: u128,
    },

    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, QslqError>;
