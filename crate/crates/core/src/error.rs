use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("double factorial undefined for {0} (use a ratio)")]
    DoubleFactorialDomain(i64),

    #[error("singular double-factorial ratio {a}!!/{b}!!: zero factor in the telescoping product")]
    SingularRatio { a: i64, b: i64 },

    #[error("function registry has no entry for c_{q} (derivative order {h})")]
    MissingSymbol { q: u32, h: u32 },

    #[error("derivative order {requested} of c_{q} exceeds registry bound {bound}")]
    DerivativeOrder { q: u32, requested: u32, bound: u32 },

    #[error("gamma must be positive")]
    NonPositiveGamma,

    #[error("four-vector is not timelike and future-directed")]
    Spacelike,

    #[error("gamma = sqrt(-mu.mu) is not representable exactly in this scalar type")]
    IrrationalGamma,

    #[error("rank {rank} too small for {op}")]
    RankTooSmall { op: &'static str, rank: usize },

    #[error("rank mismatch: expected {expected}, got {got}")]
    RankMismatch { expected: usize, got: usize },

    #[error("rank {rank} exceeds limit {limit}")]
    RankLimit { rank: usize, limit: usize },

    #[error("characteristic condition violated at s = {s} for rank {rank}")]
    CharacteristicViolation { rank: usize, s: usize },

    #[error("leading monomial gamma^{gamma_pow} excluded by the lift hypothesis (p = {p}, m = {m}, r = {r})")]
    LiftHypothesis { p: i64, m: usize, r: usize, gamma_pow: i64 },

    #[error("expected {expected} free functions, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("monomial gamma^{gamma_pow} is not of the form gamma^(-2(3+p)) with p >= 0")]
    InadmissibleMonomial { gamma_pow: i64 },

    #[error("free function must be independent of gamma")]
    GammaDependentFreeFunction,

    #[error("antiderivative of gamma^-1 is a logarithm")]
    LogarithmicAntiderivative,

    #[error("product of two formal c-function symbols is not representable")]
    SymbolProduct,

    #[error("parity violation: M must be even and N odd (got M = {m}, N = {n})")]
    Parity { m: u32, n: u32 },

    #[error("closure order ({h}, {k}) not available")]
    MissingOrder { h: u32, k: u32 },

    #[error("resource cap exceeded: rank {rank} > {cap}")]
    CapExceeded { rank: u32, cap: u32 },

    #[error("entropy undefined: dH/dlambda = 0")]
    UndefinedEntropy,

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("finite-difference step degenerates the state")]
    StepDegeneracy,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// A zero factor in a double-factorial ratio, including the excluded
    /// range of the trace inverse.
    pub fn is_singular_ratio(&self) -> bool {
        matches!(self, Error::SingularRatio { .. } | Error::LiftHypothesis { .. })
    }

    /// Process exit code: 2 for bad input, 3 for resource caps, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::Parity { .. }
            | Error::Spacelike
            | Error::IrrationalGamma
            | Error::NonPositiveGamma => 2,
            Error::CapExceeded { .. } | Error::RankLimit { .. } => 3,
            _ => 1,
        }
    }
}
