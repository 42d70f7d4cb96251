use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty measure: total mass is zero")]
    EmptyMeasure,

    #[error("invalid measure spec: {0}")]
    InvalidSpec(String),

    #[error("point {x}+{y}i lies outside the ambient region")]
    PointOutsideRegion { x: f64, y: f64 },

    #[error("refinement level {requested} is below the current level {current}")]
    LevelBelowCurrent { requested: u32, current: u32 },

    #[error("cutoff {cutoff} exceeds finest level {finest}")]
    CutoffAboveFinest { cutoff: u32, finest: u32 },

    #[error("target epsilon {epsilon} needs a cutoff beyond the level cap {cap}: increase level cap")]
    LevelCapExceeded { epsilon: f64, cap: u32 },

    #[error("blocks not disjoint: coordinate {0} appears in two blocks")]
    BlocksNotDisjoint(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("exponent must lie in (1, inf), got {0}")]
    BadExponent(f64),

    #[error("operation requires p = 2 on both spaces")]
    NotHilbert,

    #[error("Hilbert case: use the cluster-point-only criterion, out of scope")]
    HilbertCaseExcluded,

    #[error("theorem hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("change of basis is singular")]
    SingularBasis,

    #[error("ambient mismatch: expected {expected:?}, got {got:?}")]
    AmbientMismatch {
        expected: crate::dyadic::Ambient,
        got: crate::dyadic::Ambient,
    },

    #[error("measures use different frames; normalize the pair with a shared frame first")]
    FrameMismatch,

    #[error("entry {x}+{y}i is not in the support of the nonatomic part")]
    EntryOffSupport { x: f64, y: f64 },

    #[error("neighborhoods overlap at level {level}: refine")]
    Refine { level: u32 },

    #[error("level {level} too small: need 2^L >= 2^k for k = {k}")]
    LevelTooSmall { level: u32, k: u32 },

    #[error("certificate check failed: {0}")]
    CheckFailed(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}
