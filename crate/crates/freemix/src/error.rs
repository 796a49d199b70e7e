use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unsupported beta {0}; only beta = 1 (orthogonal) and 2 (unitary) are implemented")]
    UnsupportedBeta(u8),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("evaluation point {z} collides with a pole")]
    PoleCollision { z: f64 },
    #[error("classical and free fourth moments are indistinguishable; p is undefined")]
    DegenerateDenominator,
    #[error("eigenvalue solver failed: {0}")]
    EigenFailure(String),
    #[error("R-transform branch selection failed at w = {0}")]
    BranchSelection(String),
    #[error("integer overflow in necklace count for n = {n}, k = {k}")]
    NecklaceOverflow { n: u32, k: u64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
