use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("density matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("density matrix trace is {0} (expected 1)")]
    NotUnitTrace(f64),
    #[error("state is not faithful: eigenvalue {0:.3e} below floor {1:.1e}")]
    NotFaithful(f64, f64),
    #[error("bad dimension: {0}")]
    BadDimension(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("multiplier is not finite at r = {0}")]
    NonFiniteMultiplier(f64),
    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("weights must be convex: {0}")]
    BadWeights(String),
    #[error("bad range: {0}")]
    BadRange(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("unsupported kernel for this scheme: {0}")]
    UnsupportedKernel(String),
    #[error("bad exponents: {0}")]
    BadExponents(String),
    #[error("unbound variable x{0}")]
    UnboundVariable(usize),
    #[error("variable x{index} has norm {norm} outside D_{radius}")]
    DomainViolation { index: usize, norm: f64, radius: f64 },
    #[error("bad instantiation: {0}")]
    BadInstantiation(String),
    #[error("bad parameters: {0}")]
    BadParameters(String),
    #[error("u must be positive, got {0}")]
    NonPositiveU(f64),
    #[error("parameter window violated: {0}")]
    ParameterWindowViolation(String),
    #[error("unknown constant {0}")]
    UnknownConstant(String),
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotHermitian(_) => "NotHermitian",
            Error::NotUnitTrace(_) => "NotUnitTrace",
            Error::NotFaithful(..) => "NotFaithful",
            Error::BadDimension(_) => "BadDimension",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFiniteMultiplier(_) => "NonFiniteMultiplier",
            Error::NonPositiveBandwidth(_) => "NonPositiveBandwidth",
            Error::BadWeights(_) => "BadWeights",
            Error::BadRange(_) => "BadRange",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::UnsupportedKernel(_) => "UnsupportedKernel",
            Error::BadExponents(_) => "BadExponents",
            Error::UnboundVariable(_) => "UnboundVariable",
            Error::DomainViolation { .. } => "DomainViolation",
            Error::BadInstantiation(_) => "BadInstantiation",
            Error::BadParameters(_) => "BadParameters",
            Error::NonPositiveU(_) => "NonPositiveU",
            Error::ParameterWindowViolation(_) => "ParameterWindowViolation",
            Error::UnknownConstant(_) => "UnknownConstant",
            Error::Parse { .. } => "Parse",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
