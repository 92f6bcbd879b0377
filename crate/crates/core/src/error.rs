use thiserror::Error;

/// Errors raised by model construction, codebook handling and estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network configuration: {0}")]
    InvalidNetwork(String),
    #[error("power level must be positive and finite, got {0}")]
    InvalidPower(f64),
    #[error("invalid channel state: {0}")]
    InvalidChannel(String),
    #[error("beamforming entry {index} has magnitude {magnitude} > 1")]
    MagnitudeBound { index: usize, magnitude: f64 },
    #[error("beamforming entry {0} is not finite")]
    NonFiniteEntry(usize),
    #[error("empty codebook")]
    EmptyCodebook,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not unitary (max |U U^H - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },
    #[error("epsilon {0} outside [0, 1]")]
    InvalidEpsilon(f64),
    #[error("relay {index} out of range for a {relays}-relay network")]
    RelayIndex { index: usize, relays: usize },
    #[error("power-dependent epsilon 1/log P needs P >= e, got P = {0}")]
    PowerTooLow(f64),
    #[error("grid resolution must be at least 2, got {0}")]
    GridResolution(usize),
    #[error("exponential enumeration cap: {0} relays exceeds 20")]
    TooManyRelays(usize),
    #[error("codebook contains zero vector")]
    ZeroVector,
    #[error("overlap statistic needs at least two codebook vectors")]
    TooFewVectors,
    #[error("insufficient trials for window")]
    InsufficientTrials,
    #[error("window holds {0} curve points, need at least 3")]
    WindowTooSmall(usize),
    #[error("invalid simulation plan: {0}")]
    InvalidPlan(String),
    #[error("invalid curve file: {0}")]
    InvalidCurve(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
