use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TbError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("grid does not resolve the spectral band: {0}")]
    GridResolution(String),
    #[error("memory budget exceeded: {0}")]
    MemoryBudget(String),
    #[error("step criterion violated: {0}")]
    StepCriterion(String),
    #[error("medium extent exhausted: {0}")]
    Extent(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("lattice or spec mismatch: {0}")]
    Mismatch(String),
    #[error("Monte Carlo budget exceeded: {0}")]
    Budget(String),
    #[error("interpolation range exceeded: {0}")]
    Interpolation(String),
    #[error("ill-conditioned fit: {0}")]
    Fit(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for TbError {
    fn from(e: std::io::Error) -> Self {
        TbError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, TbError>;
