use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid source ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("degenerate denominator in {bound} bound ({value:e})")]
    DegenerateDenominator { bound: &'static str, value: f64 },

    #[error("QBER undefined: gain is zero")]
    UndefinedQber,

    #[error("inadmissible error pattern: {0}")]
    InadmissiblePattern(String),

    #[error("no feasible intensity point found")]
    NoFeasiblePoint,
}

pub type Result<T> = std::result::Result<T, Error>;
