use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("nodes {0} and {1} are coincident (degenerate configuration)")]
    CoincidentNodes(usize, usize),

    #[error("expected a unit vector, got norm {0}")]
    NonUnitInput(f64),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("node {0} has no neighbors and cannot gossip")]
    IsolatedNode(usize),

    #[error("at least 2 beacons are required, got {0}")]
    TooFewBeacons(usize),

    #[error("grounded Laplacian L_ff is singular: network is not localizable")]
    SingularGroundedLaplacian,

    #[error("step size {alpha} is outside the admissible range (0, {bound})")]
    InadmissibleStepSize { alpha: f64, bound: f64 },

    #[error("not enough data: need {needed} records, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("epsilon-time for eps={epsilon} not reached within {max_slots} slots")]
    BoundNotReached { epsilon: f64, max_slots: u64 },

    #[error("invalid framework: {0}")]
    InvalidFramework(String),

    #[error("invalid probability model: {0}")]
    InvalidProbability(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
