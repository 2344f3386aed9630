use thiserror::Error;

pub type Result<T> = std::result::Result<T, PricingError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("malformed market: {0}")]
    InvalidMarket(String),

    #[error("LP terminated within tolerance of both Farkas branches ({0}); rescale or tighten tolerance")]
    DegenerateDichotomy(String),

    #[error("market admits an arbitrage; no nonnegative discount factor exists")]
    ArbitrageExists,

    #[error("discount factor does not price the risk-free asset: sum m*(1+r) = {sum}")]
    NotNormalizable { sum: f64 },

    #[error("malformed tree: {0}")]
    InvalidTree(String),

    #[error("negative one-step discount factor {sdf} at node {node}")]
    NegativeSdf { node: usize, sdf: f64 },

    #[error("unknown node {0}")]
    UnknownNode(String),

    #[error("leaf node {0} has no terminal price")]
    MissingTerminalPrices(usize),

    #[error("pricing kernel is zero at node {0}; price undefined there")]
    ZeroKernel(usize),

    #[error("cohort aged {age} has no survivors")]
    DeadCohort { age: f64 },

    #[error("invalid survival model: {0}")]
    InvalidModel(String),

    #[error("age {age} is below the first tabulated age {first}")]
    AgeOutOfRange { age: f64, first: f64 },

    #[error("invalid valuation request: {0}")]
    InvalidRequest(String),

    #[error("ODE and quadrature disagree by {deviation:e} (tolerance {tolerance:e}); reduce the grid step")]
    StepTooLarge { deviation: f64, tolerance: f64 },

    #[error("annuity value is zero; premium rate undefined")]
    ZeroAnnuity,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for PricingError {
    fn from(err: std::io::Error) -> Self {
        PricingError::Io(err.to_string())
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(PricingError::NonFiniteInput(format!("{what}[{i}] = {}", values[i]))),
        None => Ok(()),
    }
}
