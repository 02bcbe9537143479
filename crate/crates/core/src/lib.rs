//! Exact toolkit for Q-factorial complete toric varieties given by a fan
//! matrix `V` or a weight matrix `Q`.

pub mod analysis;
pub mod bundles;
pub mod collections;
pub mod cones;
pub mod exactla;
pub mod matrices;
pub mod quotient;
pub mod rank2;
pub mod secfan;

pub use exactla::{Int, IntMatrix, Rat, RatMatrix};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("not an F-matrix: {0}")]
    NotFMatrix(String),
    #[error("not a W-matrix: {0}")]
    NotWMatrix(String),
    #[error("no positive row basis exists")]
    NoPositiveBasis,
    #[error("cone contains a line")]
    ContainsLine,
    #[error("hyperplane does not cut a facet of the Gale dual cone")]
    NotAFacet,
    #[error("fan matrix is not CF; the covering morphism need not exist")]
    NotCf,
    #[error("combinatorial budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("singular input: {0}")]
    Singular(String),
    #[error("unsupported rank: {0}")]
    Rank(String),
    #[error("chamber is not maximally bordering w.r.t. the given hyperplane")]
    NotMaxbord,
    #[error("descent stalled after {0} stage(s)")]
    DescentStalled(usize),
    #[error("primitive collection is not nef")]
    NotNef,
    #[error("invalid pinned transform: {0}")]
    Pinned(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
