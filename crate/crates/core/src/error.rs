use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probability out of range on edge ({u}, {v}): {p}")]
    ProbabilityOutOfRange { u: usize, v: usize, p: f64 },
    #[error("invalid weight on edge ({u}, {v}): {w}")]
    InvalidWeight { u: usize, v: usize, w: f64 },
    #[error("patience {patience} of online vertex {v} exceeds |U| = {offline}")]
    PatienceOutOfRange {
        v: usize,
        patience: usize,
        offline: usize,
    },
    #[error("weight-mode inconsistency: {0}")]
    WeightModeInconsistent(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("non-finite value in linear program: {0}")]
    NonFinite(String),
    #[error("linear program is {0}")]
    LpStatus(&'static str),
    #[error("simplex iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("size cap exceeded: {0}")]
    CapExceeded(String),
    #[error("missing OPT(v, R) oracle for the LP-DP formulation")]
    MissingOracle,
    #[error("formulation expects {expected} input")]
    InstanceMismatch { expected: &'static str },
    #[error("infeasible input: {0}")]
    Infeasible(String),
    #[error("benchmark limit exceeded: {0}")]
    LimitExceeded(String),
    #[error("trial {trial} failed: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },
}
