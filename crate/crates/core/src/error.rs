use ratgeom::{GeomError, ParseRatError};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid cost matrix: {0}")]
    InvalidCostMatrix(String),
    #[error("degenerate cone: round-trip cost between asset 1 and asset {asset} is zero")]
    DegenerateCone { asset: usize },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("prices must be strictly positive")]
    NonpositivePrice,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("invalid market model: {0}")]
    InvalidModel(String),
    #[error("budget exceeded: {what} needs {needed}, limit {limit}")]
    BudgetExceeded { what: &'static str, needed: u64, limit: u64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("vector is not in the solvency cone")]
    NotInCone,
    #[error("inconsistent price process: {0}")]
    InconsistentZ(String),
    #[error("superhedging set at node {node} is empty")]
    EmptySet { node: usize },
    #[error("level {level} out of range (need 0 < level < {periods})")]
    LevelOutOfRange { level: usize, periods: usize },
    #[error("dimension {d} unsupported here (max {max})")]
    UnsupportedDimension { d: usize, max: usize },
    #[error("bad event: {0}")]
    BadEvent(String),
    #[error("invalid claim: {0}")]
    InvalidClaim(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Rat(#[from] ParseRatError),
}

impl Error {
    /// Name of the violated invariant or failed precondition, for
    /// machine-readable error reports.
    pub fn invariant(&self) -> &'static str {
        match self {
            Error::InvalidCostMatrix(_) => "ExchangeMatrix: mu in [0,1), zero diagonal, triangle inequality",
            Error::DegenerateCone { .. } => "ExchangeMatrix: round-trip positivity mu^1j + mu^j1 > 0",
            Error::Infeasible(_) => "feasibility of the exact LP",
            Error::NonpositivePrice => "prices strictly positive",
            Error::PreconditionViolated(_) => "operation precondition",
            Error::InvalidModel(_) => "MarketModel: s0^1 = 1, s0 > 0, sigma row 1 = 0, bounded coefficients, T > 0",
            Error::BudgetExceeded { .. } => "computation budget",
            Error::GridMismatch(_) => "strategy grid refines into the path grid",
            Error::NotInCone => "StrategyK: k in K(Pi)",
            Error::InconsistentZ(_) => "ConsistentPriceProcess: martingale, dual-cone valued, nonzero",
            Error::EmptySet { .. } => "SuperhedgeResult: every node set nonempty",
            Error::LevelOutOfRange { .. } => "dpp_check: 0 < u < P",
            Error::UnsupportedDimension { .. } => "dimension bound",
            Error::BadEvent(_) => "concentration event: leaf subset with P(A) <= eps",
            Error::InvalidClaim(_) => "Claim: L >= 1, strike > 0, 2 <= i <= d",
            Error::Config(_) => "RunConfig: known keys, well-formed values",
            Error::Geom(_) => "polyhedron representation invariants",
            Error::Rat(_) => "Rat: well-formed rational literal",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
