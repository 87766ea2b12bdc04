use thiserror::Error;

pub type Result<T> = std::result::Result<T, PcaError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PcaError {
    #[error("alphabet mismatch: expected {expected} symbols, found {found}")]
    AlphabetMismatch { expected: usize, found: usize },

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("torus side {side} in coordinate {axis} is smaller than the neighborhood span {span}")]
    GeometryTooSmall { axis: usize, side: usize, span: usize },

    #[error("site {0:?} lies outside the bounded region")]
    OutsideRegion(Vec<i64>),

    #[error("symbol {symbol} out of range for alphabet of size {size}")]
    InvalidSymbol { symbol: usize, size: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("window mismatch: {0}")]
    WindowMismatch(String),

    #[error("empty sample list")]
    EmptySamples,

    #[error("{what}: {needed} exceeds budget {budget}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("operation requires a one-dimensional lattice, got dimension {0}")]
    NotOneDimensional(usize),

    #[error("neighborhood is not a contiguous interval")]
    NonContiguous,

    #[error("unknown rule {0:?}")]
    UnknownRule(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("no coalescence within t_cap = {t_cap}")]
    NoCoalescence { t_cap: u64 },

    #[error("backward search exceeded its caps (nodes {nodes}, depth {depth})")]
    SearchExhausted { nodes: usize, depth: u64 },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("rule is not a deterministic CA composed with zero-range noise")]
    NotDecomposable,

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for PcaError {
    fn from(e: std::io::Error) -> Self {
        PcaError::Io(e.to_string())
    }
}

pub(crate) fn check_distribution(p: &[f64], tol: f64, what: &str) -> Result<()> {
    if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= -tol)) {
        return Err(PcaError::InvalidDistribution(format!(
            "{what}: entry {x} is negative or not finite"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > tol {
        return Err(PcaError::InvalidDistribution(format!(
            "{what}: sums to {s}, not 1"
        )));
    }
    Ok(())
}
