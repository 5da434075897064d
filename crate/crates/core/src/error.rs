use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("partition order {0} is outside the supported range 2..=24")]
    OrderOutOfRange(usize),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("moment sequence is not centred (first-order value is {0})")]
    NotCentred(f64),

    #[error("quadrature did not converge: estimate {estimate}, error bound {error_bound}")]
    QuadratureNonConvergence { estimate: f64, error_bound: f64 },

    #[error("expected {expected:.1} flats per realization exceeds the budget cap of {cap}")]
    BudgetExceeded { expected: f64, cap: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("sample variance of component {0} is zero")]
    DegenerateVariance(usize),

    #[error("accumulators cannot be merged: {0}")]
    IncompatibleAccumulators(String),
}
