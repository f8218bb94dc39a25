use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tree has no vertices")]
    EmptyTree,
    #[error("multiple roots: vertices {first} and {second} have no parent")]
    MultipleRoots { first: usize, second: usize },
    #[error("cycle detected through vertex {vertex}")]
    CycleDetected { vertex: usize },
    #[error("vertex {vertex} has dangling parent id {parent}")]
    DanglingParent { vertex: usize, parent: usize },
    #[error("invalid vertex id {0}")]
    InvalidVertex(usize),
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid size {0}")]
    InvalidSize(usize),
    #[error("size cap exceeded: {requested} vertices requested, cap is {cap}")]
    SizeCapExceeded { requested: u128, cap: usize },
    #[error("infeasible tree model: {0}")]
    InfeasibleModel(String),
    #[error("invalid weight law: {0}")]
    InvalidLaw(String),
    #[error("invalid level profile: {0}")]
    InvalidProfile(String),
    #[error("non-finite iterate in solver (rescale the weights)")]
    NonFiniteIterate,
    #[error("instance too large for brute force: n = {n}, limit {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("sequence length mismatch: u has {u}, w has {w}")]
    LengthMismatch { u: usize, w: usize },
    #[error("depth mismatch: profile has {profile} levels, weights have {weights}")]
    DepthMismatch { profile: usize, weights: usize },
    #[error("sigma must lie in (0, 1), got {0}")]
    InvalidSigma(f64),
    #[error("invalid instance file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
