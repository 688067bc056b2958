use alloc::string::String;

/// A violated precondition of a library call.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ContractError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("coordinate {value} at axis {axis} is outside [0, 1]")]
    CoordinateOutOfRange { axis: usize, value: f64 },
    #[error("radius must be positive and finite, got {0}")]
    NonPositiveRadius(f64),
    #[error("grid resolution must be positive and finite, got {0}")]
    BadResolution(f64),
    #[error("space dimension must be at least 1")]
    ZeroDimension,
    #[error("unknown arm id {0}")]
    UnknownArm(usize),
    #[error("probability {0} is outside (0, 1]")]
    BadProbability(f64),
    #[error("round indices start at 1")]
    ZeroRound,
    #[error("traces have unequal lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no traces to aggregate")]
    EmptyInput,
    #[error("{0}")]
    Other(String),
}

/// An experiment configuration that cannot be simulated.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("delta must lie in (0, 1), got {0}")]
    Delta(f64),
    #[error("sigma must be finite and nonnegative, got {0}")]
    Sigma(f64),
    #[error("trials must be at least 1")]
    ZeroTrials,
    #[error("trial index {index} is out of range for {trials} trials")]
    TrialIndex { index: u32, trials: u32 },
    #[error("invalid delay distribution: {0}")]
    Delay(String),
    #[error("grid resolution must be positive and finite, got {0}")]
    GridResolution(f64),
    #[error("{0}")]
    Other(String),
}

/// Either kind of failure from a simulation entry point.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("contract violation: {0}")]
    Contract(#[from] ContractError),
}
