use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("weight {value} at index {index} is negative")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weight at index {index} is not finite")]
    NonFiniteWeight { index: usize },
    #[error("distribution has no weights")]
    EmptyWeights,
    #[error("distribution has zero total mass")]
    ZeroMass,
    #[error("total mass {total} outside tolerance of 1")]
    MassOutOfTolerance { total: f64 },
    #[error("convolution support of {size} points exceeds cap of {cap}")]
    SupportCap { size: usize, cap: usize },
    #[error("sigma2 must be strictly positive and finite, got {0}")]
    NonPositiveSigma2(f64),
    #[error("mu must be finite, got {0}")]
    NonFiniteMu(f64),
    #[error("kappa {kappa} outside operator domain [{lo}, {hi}) for mu - sigma2 and mu + sigma2 + 1")]
    KappaOutOfDomain { kappa: i64, lo: f64, hi: f64 },
    #[error("eps must lie in (0, 1), got {0}")]
    InvalidEps(f64),
    #[error("distribution has zero variance; zero-bias transform undefined")]
    ZeroVariance,
    #[error("size bias needs nonnegative support, offset is {0}")]
    NegativeSupport(i64),
    #[error("size bias needs a positive mean")]
    ZeroMean,
    #[error("numerical violation: {0}")]
    Numerical(String),
    #[error("function table [{start}, {end}] does not cover required window [{need_lo}, {need_hi}]")]
    UncoveredWindow { start: i64, end: i64, need_lo: i64, need_hi: i64 },
    #[error("component set is empty")]
    EmptyComponents,
    #[error("every component is degenerate (zero variance)")]
    AllDegenerate,
    #[error("component index {index} out of range for {len} components")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("kappa {kappa} is not the default choice {default}; Stein factor bounds are not established there")]
    NonDefaultKappa { kappa: i64, default: i64 },
    #[error("parameters are not in the ergodic regime (beta vanishes at kappa)")]
    NonErgodic,
    #[error("state {state} not represented in the stationary window [{lo}, {hi}]")]
    OutsideWindow { state: i64, lo: i64, hi: i64 },
    #[error("target set is not finite or cofinite within the window: {0}")]
    InvalidTarget(String),
    #[error("simulation visited state {state}, beyond the cap of {cap} from kappa")]
    StateCapExceeded { state: i64, cap: i64 },
    #[error("replica count must be at least 1")]
    ZeroReplicas,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("bound is vacuous: {0}")]
    Vacuous(String),
}

pub type Result<T> = std::result::Result<T, Error>;
