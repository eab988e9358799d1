use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed edge record: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("line {line}: negative weight {weight}")]
    NegativeWeight { line: usize, weight: f64 },

    #[error("line {line}: self-loop on node {token:?} (self-loops are disabled)")]
    SelfLoop { line: usize, token: String },

    #[error("{what} index {got} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    #[error("batch base size {batch} does not match graph size {graph}")]
    BatchBaseMismatch { batch: usize, graph: usize },

    #[error("removal of nonexistent edge ({i}, {j})")]
    MissingEdge { i: usize, j: usize },

    #[error("initial size {n} exceeds graph size {max}")]
    PrefixTooLarge { n: usize, max: usize },

    #[error("node {node} has zero degree")]
    ZeroDegree { node: usize },

    #[error("requested rank {d} exceeds dimension {n}")]
    RankTooLarge { d: usize, n: usize },

    #[error("solver did not converge after {steps} steps (worst residual {residual:.3e})")]
    NoConvergence { steps: usize, residual: f64 },

    #[error("embedding dim {d} is not divisible by order count {k}")]
    DimNotDivisible { d: usize, k: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("empty stream: scenario has no arrival batches")]
    EmptyStream,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch in {what}: {left} vs {right}")]
    DimMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("unknown node token {token:?} on line {line}")]
    UnknownToken { token: String, line: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
