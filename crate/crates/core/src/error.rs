use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FpqrError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e} below -{floor:e})")]
    NotPsd { eigenvalue: f64, floor: f64 },

    #[error("degenerate column {column}: zero sample variance")]
    DegenerateColumn { column: usize },

    #[error("degenerate component {component}: data exhausted before this component")]
    DegenerateComponent { component: usize },

    #[error("ill-conditioned back-map: condition number {condition:e}")]
    IllConditioned { condition: f64 },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("no feasible model in the search grid")]
    NoFeasibleModel,
}

pub type Result<T> = std::result::Result<T, FpqrError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(FpqrError::InvalidInput(msg.into()))
}
