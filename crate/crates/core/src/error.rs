use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("regions leave {gaps} cell(s) uncovered and {overlaps} cell(s) covered more than once")]
    Coverage { gaps: usize, overlaps: usize },

    #[error("integrand is not finite at cell {cell}")]
    NonFiniteIntegrand { cell: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("stations {first} and {second} share the same position")]
    DuplicateStation { first: usize, second: usize },

    #[error("at least one station is required")]
    NoStations,

    #[error("power requirement overflows: load x throughput = {exponent} bits exceeds {limit}")]
    PowerOverflow { exponent: f64, limit: f64 },

    #[error("alpha = 1 (proportional fairness) is not supported")]
    UnsupportedAlpha,

    #[error("instance too large for {mode}: {reason}")]
    InstanceTooLarge { mode: &'static str, reason: String },

    #[error("{0}")]
    Mismatch(String),

    #[error("no equilibria to select from")]
    NoEquilibria,

    #[error("optimum cost is {0}, price of anarchy undefined")]
    DegenerateOptimum(f64),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
