use thiserror::Error;

/// Errors produced anywhere in the verification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("expected {expected} component expressions, found {found}")]
    Arity { expected: usize, found: usize },

    #[error("unknown variable `{name}` (valid: x1..x{dim})")]
    UnknownVariable { name: String, dim: usize },

    #[error("unknown builtin system `{0}`")]
    UnknownBuiltin(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("linear program is unbounded (missing box facets?)")]
    Unbounded,

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("region budget exceeded: more than {cap} regions")]
    BudgetExceeded { cap: usize },

    #[error("{count} deduplicated hyperplanes exceeds the poset limit of {limit}")]
    LimitExceeded { count: usize, limit: usize },

    #[error("no sampled point is feasible for the polytope")]
    NoFeasibleSample,

    #[error("invalid optimizer budget: {0}")]
    Budget(String),

    #[error("gradient is zero; no aligning rotation exists")]
    ZeroGradient,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
