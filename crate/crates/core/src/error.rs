use thiserror::Error;

/// Errors raised by the hypercube, Fourier, tree and harness layers.
///
/// Feature indices carried by variants are 1-based, matching every external format.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("feature x{0} is already fixed in this cell")]
    FeatureAlreadyFixed(usize),
    #[error("feature index {index} is out of range 1..={dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension {0} is not supported (must be 1..=64)")]
    UnsupportedDimension(usize),
    #[error("function support reaches x{max_feature} but the dimension is {dim}")]
    SupportExceedsDimension { max_feature: usize, dim: usize },
    #[error("invalid sign {0}; coordinates must be -1 or +1")]
    InvalidSign(i64),
    #[error("non-finite response at row {0}")]
    NonFiniteResponse(usize),
    #[error("table length {0} is not a power of two")]
    NonPowerOfTwoLength(usize),
    #[error("sparsity {sparsity} exceeds the enumeration cap {cap}")]
    SparsityCapExceeded { sparsity: usize, cap: usize },
    #[error("function is constant on every cell")]
    ConstantFunction,
    #[error("no traversal exists: a target has fewer than two free features")]
    NoTraversal,
    #[error("no traversal of size <= {0} found")]
    SearchCapExceeded(usize),
    #[error("vertex {0} is not a Fourier subset of the function")]
    UnknownVertex(String),
    #[error("function satisfies MSP; the non-MSP bound does not apply")]
    FunctionIsMsp,
    #[error("common refinement exceeds {cap} cells")]
    RefinementCapExceeded { cap: usize },
    #[error("cell is empty")]
    EmptyCell,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("memo exceeded {cap} states (estimated {estimated} reachable cells)")]
    StateCapExceeded { cap: usize, estimated: u128 },
    #[error("brute-force enumeration too large: {0}")]
    TooLarge(String),
    #[error("invalid arguments: {0}")]
    InvalidArgs(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
