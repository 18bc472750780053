use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("cycle detected in causal structure involving `{0}`")]
    Cycle(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("unsupported causal structure: {0}")]
    Unsupported(String),

    #[error("cardinality mismatch: {0}")]
    Cardinality(String),

    #[error("operator does not belong to this inflation: {0}")]
    ForeignOperator(String),

    #[error("monomial is not in canonical form")]
    NotCanonical,

    #[error("zero monomial has no factorization")]
    ZeroMonomial,

    #[error("invalid generating set `{0}`")]
    Columns(String),

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("conflicting value for `{name}`: {old} vs {new}")]
    Conflict { name: String, old: f64, new: f64 },

    #[error("objective not representable in this relaxation: {0}")]
    NotRepresentable(String),

    #[error("invalid objective: {0}")]
    Objective(String),

    #[error("supports problem: {0}")]
    Supports(String),

    #[error("certificate: {0}")]
    Certificate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("oracle limit exceeded: {0}")]
    OracleLimit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
