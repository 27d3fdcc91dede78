//! Crate-wide error type.

use thiserror::Error;

/// Every fallible operation in the crate returns this error.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A non-finite real was supplied where a finite one is required.
    #[error("non-finite value for {0}")]
    NonFinite(&'static str),

    /// A latency function was looked up by a name nobody registered.
    #[error("unknown custom latency function `{0}`")]
    UnknownCustom(String),

    /// A player that has not been assigned a strategy was queried.
    #[error("player {0} is not assigned")]
    UnassignedPlayer(usize),

    /// An operation that needs a total profile received a partial one.
    #[error("profile is partial: player {0} is unassigned")]
    PartialProfile(usize),

    /// An enumeration or size limit was exceeded.
    #[error("{what}: {needed} exceeds cap {cap}")]
    CapExceeded {
        what: &'static str,
        needed: f64,
        cap: f64,
    },

    /// A ratio was requested against a zero-cost optimum.
    #[error("optimum has zero social cost")]
    ZeroOptimum,

    /// A prescribed walk choice exceeded the (1+eps) slack.
    #[error(
        "walk step {step}: player {player} prescribed value {chosen} exceeds (1+eps)*min = {bound}"
    )]
    WalkViolation {
        step: usize,
        player: usize,
        chosen: f64,
        bound: f64,
    },

    /// A supremum diverged within the search bracket.
    #[error("unbounded supremum: {0}")]
    Unbounded(String),

    /// No witness tuple beating the requested threshold was found.
    #[error("no witness above {threshold} found ({detail})")]
    WitnessNotFound { threshold: f64, detail: String },

    /// A latency function failed the semi-convexity probe.
    #[error("latency function is not semi-convex on the probe grid")]
    NotSemiConvex,

    /// Preconditions of a construction do not hold.
    #[error("construction not applicable: {0}")]
    NotApplicable(String),

    /// Closed form and simulation disagree beyond tolerance.
    #[error("consistency check failed: {0}")]
    Inconsistent(String),

    /// JSON (de)serialization failure.
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// File-system failure.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate result alias.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(x: f64, what: &'static str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
