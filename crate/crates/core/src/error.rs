use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("infeasible parameters: {0}")]
    InfeasibleParameters(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("missing projection reply from verifier {0}")]
    MissingReply(usize),
    #[error("invalid verifier subset: {0}")]
    InvalidSubset(String),
    #[error("protocol aborted: {0}")]
    ProtocolAbort(String),
    #[error("duplicate client id {0:?}")]
    DuplicateClientId(String),
    #[error("unknown party {0}")]
    UnknownParty(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("aggregation result was aborted")]
    AbortedInput,
    #[error("malformed message: {0}")]
    Decode(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
