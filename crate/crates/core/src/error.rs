use thiserror::Error;

pub type Result<T, E = DarrmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DarrmError {
    /// An argument lies outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// No admissible value exists for the requested parameters.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// The request exceeds a configured enumeration or iteration budget.
    #[error("resource limit: {0}")]
    Resource(String),
    /// A hypothesis the operation relies on does not hold for the input.
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(DarrmError::Domain(msg.into()))
}
