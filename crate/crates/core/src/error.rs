use alloc::string::String;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("block index {index} out of range for {count} blocks")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("size cap exceeded: {size} > {cap}")]
    SizeCapExceeded { size: usize, cap: usize },
    #[error("residual undefined off the set (block {block}, violation {violation:e})")]
    OffSet { block: usize, violation: f64 },
    #[error("penalty residuals need k >= 1")]
    NoPreviousIterate,
    #[error("bounds undefined: eta_x = {eta_x}, eta_z = {eta_z}")]
    BoundsUndefined { eta_x: f64, eta_z: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("lower bound unavailable: {0}")]
    LowerBoundUnavailable(String),
    #[error("singular or indefinite system: {0}")]
    Singular(String),
    #[error("active bounds at the reference solution (block {block}, coordinate {coord})")]
    ActiveBounds { block: usize, coord: usize },
    #[error("could not draw a full-row-rank coupling matrix in {0} attempts")]
    RankRejection(usize),
    #[error("block {block} subproblem failed: {reason}")]
    BlockFailure { block: usize, reason: String },
}

pub type Result<T> = core::result::Result<T, Error>;
