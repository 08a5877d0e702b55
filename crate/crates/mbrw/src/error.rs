use thiserror::Error;

/// Errors surfaced by the simulation toolkit.
///
/// Every variant names the violated contract so that batch runs fail with a
/// message a config author can act on.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("ball radius must lie in (0, 1] so the planar lens formula is exact: got {0}")]
    InvalidRadius(f64),

    #[error("distance must be nonnegative: got {0}")]
    NegativeDistance(f64),

    #[error("distance must be positive: got {0}")]
    NonPositiveDistance(f64),

    #[error("distance {0} outside (0, 2]")]
    DistanceOutOfRange(f64),

    #[error("band bounds must satisfy lo <= hi: got [{lo}, {hi}]")]
    InvalidBand { lo: u32, hi: u32 },

    #[error("variance of the infinite scale band diverges at zero distance")]
    DivergentVariance,

    #[error("gamma must lie in the L2 phase [0, 0.5): got {0}")]
    GammaOutOfPhase(f64),

    #[error("moment order {q} outside [0, {max}]")]
    MomentOrderOutOfRange { q: f64, max: f64 },

    #[error("grid side {0} must be a power of two >= 8")]
    InvalidGridSide(usize),

    #[error(
        "scale radius {radius} finer than grid: need radius >= 4*spacing = {limit}; \
         refine the grid or truncate the scale range"
    )]
    ScaleFinerThanGrid { radius: f64, limit: f64 },

    #[error("band [{lo}, {hi}] not sampled in field truncated at scale {w}")]
    BandNotSampled { lo: u32, hi: u32, w: u32 },

    #[error(
        "covariance factorization failed after jitter {jitter:e}: \
         pivot {index} has value {value:e} (matrix not positive definite)"
    )]
    NotPositiveDefinite {
        index: usize,
        value: f64,
        jitter: f64,
    },

    #[error("requested time {t} beyond accumulated trace end {max}; simulate a longer horizon")]
    TraceTooShort { t: f64, max: f64 },

    #[error(
        "path too coarse for the grid: {frac:.3} of steps moved beyond adjacent cells \
         (limit 0.01); reduce dt or coarsen the grid"
    )]
    PathTooCoarse { frac: f64 },

    #[error("insufficient conditioning events: {hits} paths realized the conditioning (need {min})")]
    InsufficientConditioning { hits: usize, min: usize },

    #[error(
        "underdetermined fit: {points} radii spanning {decades:.3} decades \
         (need >= {min_points} radii over >= {min_decades} decades)"
    )]
    UnderdeterminedFit {
        points: usize,
        decades: f64,
        min_points: usize,
        min_decades: f64,
    },

    #[error("radii must lie in ({lo}, {hi}]: got {value}")]
    RadiusOutOfWindow { lo: f64, hi: f64, value: f64 },

    #[error("need at least {min} replicas: got {got}")]
    TooFewReplicas { got: usize, min: usize },

    #[error("point grid must be at least 8 points per side: got {0}")]
    PointGridTooCoarse(usize),

    #[error("{0}")]
    InvalidArgument(String),
}
