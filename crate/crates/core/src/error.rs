use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("n = {n} is outside the supported range 1..={max}")]
    SizeLimit { n: u32, max: u32 },
    #[error("table of length {len} is not 2^{n}")]
    BadLength { n: u32, len: usize },
    #[error("Fourier coefficient at z = {z} is zero; an explicit sign is required")]
    ZeroCoefficient { z: usize },
    #[error("no samples to score")]
    EmptySamples,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("n = {n} is odd, so sqrt(N)/2 is not an integer")]
    OddRoot { n: u32 },
    #[error("set of size {available} cannot supply {needed} distinct positions")]
    SetTooSmall { available: usize, needed: usize },
    #[error("distribution has no mass")]
    EmptyDistribution,
    #[error("sample budget must be at least 1")]
    BudgetZero,
    #[error("requested {requested} entries, budget is {limit}")]
    BudgetExceeded { requested: u64, limit: u64 },
    #[error("offset d = {d} invalid for N = {len}")]
    BadOffset { len: usize, d: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("device failure: {0}")]
    DeviceFailure(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
