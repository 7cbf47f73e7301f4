use thiserror::Error;

/// Errors raised by the library. Every variant is a hard failure: nothing is
/// rounded or truncated silently.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("dyadic overflow: {0}")]
    Overflow(String),

    #[error("cannot parse dyadic from {0:?}")]
    Parse(String),

    #[error("empty interval [{lo}, {hi})")]
    EmptyInterval { lo: String, hi: String },

    #[error("invalid set descriptor: {0}")]
    InvalidSet(String),

    #[error("invalid witness: {0}")]
    InvalidWitness(String),

    #[error("invalid weight rule: {0}")]
    InvalidWeights(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("window holds more than {cap} points")]
    WindowTooLarge { cap: u64 },

    #[error("thinning a thinned set is not supported")]
    NestedThinning,

    #[error("set holds non-dyadic points; use the binary64 enumeration")]
    NonDyadicSet,

    #[error("witness generated only up to {horizon}; {x} is beyond it")]
    GeneratorExhausted { x: String, horizon: String },

    #[error("two points of the set coincide at {0}")]
    ZeroGap(String),

    #[error("refinement needs {pieces} pieces, above the cap of {cap}")]
    RefinementTooLarge { pieces: u128, cap: u64 },

    #[error("weight index {0} is outside the weight table")]
    WeightIndex(u64),

    #[error("fast-decay condition fails at n={0}")]
    FastDecayViolated(u64),

    #[error("set exhausted after {built} of {wanted} blocks")]
    InsufficientLambda { built: usize, wanted: usize },

    #[error("claim violated at x={x}, block {n}: {detail}")]
    ClaimViolated { x: String, n: usize, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
