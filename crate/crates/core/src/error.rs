use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("a step distribution needs at least two atoms")]
    SingleAtom,

    #[error("operation requires a finite-support distribution, got sampler-only law `{0}`")]
    NotFiniteSupport(String),

    #[error("walk analyses require a mean-zero step law, `{label}` has mean {mean}")]
    NonZeroMean { label: String, mean: String },

    #[error("non-integer moment order {0} requires absolute=true")]
    NonIntegerOrderWithoutAbsolute(f64),

    #[error("window width {width} is not acceptable (must be at least the span {span})")]
    UnacceptableWindow { width: String, span: String },

    #[error("state space too large: about {states} lattice states exceed the cap of {cap}")]
    StateSpaceTooLarge { states: u128, cap: u64 },

    #[error("conditioning event has zero probability: {0}")]
    ZeroDenominator(String),

    #[error("conditioning event was never hit in {trials} trials")]
    ZeroDenominatorSample { trials: u64 },

    #[error("exact permutation enumeration is limited to {max} elements, got {len}")]
    TooLargeForExact { len: usize, max: usize },

    #[error("{x} is not on the lattice of S_{n}")]
    OffLattice { x: String, n: u64 },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("invalid level function: {0}")]
    InvalidG(String),

    #[error("level masses sum to {0} >= 1, leaving no mass for the unit atoms")]
    NegativeMass(String),

    #[error("unknown distribution name `{0}`")]
    UnknownName(String),

    #[error("distribution `{0}` carries no level metadata")]
    NotLeveled(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
