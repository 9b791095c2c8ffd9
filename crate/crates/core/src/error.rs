use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sequence does not have a projective limit (residual {residual:.3e})")]
    NoProjectiveLimit { residual: f64 },

    #[error("trivial subspace")]
    TrivialSubspace,

    #[error("point lies outside the unit disk (|u| = {0})")]
    OutsideDisk(f64),

    #[error("point is not on H^{{p,q}} (<z,z> = {0})")]
    NotOnHpq(f64),

    #[error("not spacelike at node {node}")]
    NotSpacelike { node: usize },

    #[error("degenerate {0}")]
    Degenerate(&'static str),

    #[error("node {0} is not an interior node")]
    NotInterior(usize),

    #[error("ball of radius {radius} exits the chart; increase r0 or decrease R")]
    BallExitsChart { radius: f64 },

    #[error("grid is disconnected")]
    Disconnected,

    #[error("flow left spacelike cone")]
    LeftSpacelikeCone,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("vector is not transverse to the hypersurface")]
    NotTransverse,

    #[error("hypersurface is not locally uniformly convex at node {0}")]
    NotConvex(usize),

    #[error("point lies outside the open cone")]
    OutsideCone,

    #[error("cone contains a line")]
    ContainsLine,

    #[error("sector extraction failed: {0}")]
    SectorExtraction(String),

    #[error("Newton iteration diverged (residual history: {history:?})")]
    NewtonDivergence { history: Vec<f64> },

    #[error("tag mismatch: {0}")]
    TagMismatch(String),

    #[error("{count} target nodes are not covered by the transformed submanifold")]
    Uncovered { count: usize },

    #[error("representation sequence has no convergent tail (Cauchy gap {gap:.3e})")]
    NonConvergent { gap: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
